//! Two-pass connected-component labeling with 4-connectivity.

/// Labels the `true` cells of a row-major `width × height` mask.
///
/// Labels are `1..=count` in order of first appearance in the row-major
/// scan; background cells get `0`.
pub fn label_mask(mask: &[bool], width: usize, height: usize) -> (Vec<u32>, u32) {
    assert_eq!(mask.len(), width * height);
    let mut labels = vec![0u32; mask.len()];
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }

    for r in 0..height {
        for c in 0..width {
            let k = r * width + c;
            if !mask[k] {
                continue;
            }
            let up = if r > 0 { labels[k - width] } else { 0 };
            let left = if c > 0 { labels[k - 1] } else { 0 };
            labels[k] = match (up, left) {
                (0, 0) => {
                    let l = parent.len() as u32;
                    parent.push(l);
                    l
                }
                (a, 0) | (0, a) => a,
                (a, b) => {
                    let ra = find(&mut parent, a);
                    let rb = find(&mut parent, b);
                    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                    parent[hi as usize] = lo;
                    lo
                }
            };
        }
    }

    // second pass: resolve and renumber by first appearance
    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l);
        if remap[root as usize] == 0 {
            next += 1;
            remap[root as usize] = next;
        }
        *l = remap[root as usize];
    }
    (labels, next)
}

/// Renumber so that the component containing `seed` becomes label 1,
/// shifting the lower labels up by one. No-op when the seed is background.
pub fn promote_label(labels: &mut [u32], seed: usize) {
    let s = labels[seed];
    if s <= 1 {
        return;
    }
    for l in labels.iter_mut() {
        if *l == s {
            *l = 1;
        } else if *l != 0 && *l < s {
            *l += 1;
        }
    }
}
