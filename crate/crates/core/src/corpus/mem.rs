/// Zero-filled buffer for large, randomly accessed arrays. On Linux the
/// pages are marked for transparent huge pages before first touch, which cuts
/// TLB misses during suffix-array search.
pub(crate) fn zeroed_vec<T: bytemuck::Zeroable + bytemuck::Pod>(len: usize) -> Vec<T> {
    let v: Vec<T> = bytemuck::zeroed_vec(len);
    advise_huge(bytemuck::cast_slice(&v));
    v
}

#[cfg(target_os = "linux")]
fn advise_huge(bytes: &[u8]) {
    const HUGE: usize = 2 << 20;
    if bytes.len() < 2 * HUGE {
        return;
    }
    let page = 4096;
    let start = (bytes.as_ptr() as usize).next_multiple_of(page);
    let end = (bytes.as_ptr() as usize + bytes.len()) & !(page - 1);
    // SAFETY: the range lies inside a live allocation; the advice only
    // affects how the kernel backs it, not its contents.
    unsafe {
        libc::madvise(start as *mut libc::c_void, end - start, libc::MADV_HUGEPAGE);
    }
}

#[cfg(not(target_os = "linux"))]
fn advise_huge(_bytes: &[u8]) {}
