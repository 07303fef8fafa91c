use std::collections::{BinaryHeap, VecDeque};

use super::MetricsError;

/// `out[i]` is the largest `discounted[j]` over every match `j` that covers
/// `i` (`j <= i < j + raw[j]`), or 0 when nothing covers `i`.
pub fn reproduction_lengths(raw: &[usize], discounted: &[usize]) -> Result<Vec<usize>, MetricsError> {
    if raw.len() != discounted.len() {
        return Err(MetricsError::LengthMismatch {
            raw: raw.len(),
            discounted: discounted.len(),
        });
    }
    if let Some(i) = (0..raw.len()).find(|&i| discounted[i] > raw[i]) {
        return Err(MetricsError::DiscountExceedsRaw {
            index: i,
            raw: raw[i],
            discounted: discounted[i],
        });
    }
    let mut prev_end = 0;
    let monotone = raw.iter().enumerate().filter(|(_, &r)| r > 0).all(|(j, &r)| {
        let ok = j + r >= prev_end;
        prev_end = j + r;
        ok
    });
    Ok(if monotone {
        sweep_monotone(raw, discounted)
    } else {
        sweep_heap(raw, discounted)
    })
}

/// Linear sweep for profiles whose match ends `j + raw[j]` never decrease,
/// which holds for every suffix-closed profile.
fn sweep_monotone(raw: &[usize], discounted: &[usize]) -> Vec<usize> {
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut out = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        if raw[i] > 0 {
            while window.back().is_some_and(|&b| discounted[b] <= discounted[i]) {
                window.pop_back();
            }
            window.push_back(i);
        }
        while window.front().is_some_and(|&f| f + raw[f] <= i) {
            window.pop_front();
        }
        out.push(window.front().map_or(0, |&f| discounted[f]));
    }
    out
}

fn sweep_heap(raw: &[usize], discounted: &[usize]) -> Vec<usize> {
    let mut heap = BinaryHeap::new();
    let mut out = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        if raw[i] > 0 {
            heap.push((discounted[i], i + raw[i]));
        }
        while heap.peek().is_some_and(|&(_, end)| end <= i) {
            heap.pop();
        }
        out.push(heap.peek().map_or(0, |&(d, _)| d));
    }
    out
}
