//! Two-pass connected-component labeling with union-find, and border clearing.

use super::image::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    /// Neighbors already visited in raster order.
    fn causal_offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }
}

/// Labels `1..=K` on foreground pixels (0 is background), numbered in raster order
/// of each component's first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn num_components(&self) -> usize {
        self.sizes.len()
    }

    /// Pixel count of component `label` (1-based).
    pub fn component_size(&self, label: u32) -> usize {
        self.sizes[label as usize - 1]
    }

    /// Pixel counts indexed by `label - 1`.
    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Mask of the pixels whose label satisfies `keep`.
    pub fn select(&self, mut keep: impl FnMut(u32) -> bool) -> BinaryMask {
        let mut keep_label = vec![false; self.sizes.len() + 1];
        for (l, k) in keep_label.iter_mut().enumerate().skip(1) {
            *k = keep(l as u32);
        }
        BinaryMask::from_vec(
            self.width,
            self.height,
            self.labels.iter().map(|&l| keep_label[l as usize]).collect(),
        )
        .expect("same dims")
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = mask.dims();
    let mut provisional = vec![0u32; w * h];
    // parent[0] is the background sentinel.
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut assigned = 0u32;
            for &(dx, dy) in connectivity.causal_offsets() {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize {
                    continue;
                }
                let l = provisional[ny as usize * w + nx as usize];
                if l == 0 {
                    continue;
                }
                if assigned == 0 {
                    assigned = l;
                } else {
                    union(&mut parent, assigned, l);
                }
            }
            if assigned == 0 {
                assigned = parent.len() as u32;
                parent.push(assigned);
            }
            provisional[y * w + x] = assigned;
        }
    }

    let mut final_of_root = vec![0u32; parent.len()];
    let mut sizes = Vec::new();
    let mut labels = vec![0u32; w * h];
    for (i, &p) in provisional.iter().enumerate() {
        if p == 0 {
            continue;
        }
        let root = find(&mut parent, p) as usize;
        if final_of_root[root] == 0 {
            sizes.push(0);
            final_of_root[root] = sizes.len() as u32;
        }
        let l = final_of_root[root];
        sizes[l as usize - 1] += 1;
        labels[i] = l;
    }

    LabelMap {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// Remove every component that contains a pixel on the image border.
pub fn clear_border(mask: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let (w, h) = mask.dims();
    let labels = connected_components(mask, connectivity);
    let mut touches = vec![false; labels.num_components() + 1];
    for x in 0..w {
        touches[labels.get(x, 0) as usize] = true;
        touches[labels.get(x, h - 1) as usize] = true;
    }
    for y in 0..h {
        touches[labels.get(0, y) as usize] = true;
        touches[labels.get(w - 1, y) as usize] = true;
    }
    labels.select(|l| !touches[l as usize])
}
