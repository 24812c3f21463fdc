//! Per-surface cell grids and their PGM / CSV export.

use std::fmt::Write as _;

/// A `w x h` grid indexed by `(r, c)`, `r` along the surface width and `c`
/// along its height. Stored with `r` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    w: usize,
    h: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(w: usize, h: usize, value: T) -> Self {
        Self {
            w,
            h,
            data: vec![value; w * h],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(w: usize, h: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(w * h);
        for c in 0..h {
            for r in 0..w {
                data.push(f(r, c));
            }
        }
        Self { w, h, data }
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.w, self.h)
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[c * self.w + r]
    }

    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[c * self.w + r] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// `(r, c, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.w;
        self.data.iter().enumerate().map(move |(i, v)| (i % w, i / w, v))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            w: self.w,
            h: self.h,
            data: self.data.iter().map(f).collect(),
        }
    }
}

/// Plain (P2) PGM with one image row per cell row `c`; pixel value is
/// `round(255 * v)` with `v` clamped to `[0, 1]`.
pub fn to_pgm(grid: &Grid<f64>) -> String {
    let mut out = format!("P2\n{} {}\n255\n", grid.width(), grid.height());
    for c in 0..grid.height() {
        let row: Vec<String> = (0..grid.width())
            .map(|r| ((grid.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Raw values, one CSV line per cell row `c`.
pub fn to_csv(grid: &Grid<f64>) -> String {
    let mut out = String::new();
    for c in 0..grid.height() {
        for r in 0..grid.width() {
            if r > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", grid.get(r, c));
        }
        out.push('\n');
    }
    out
}
