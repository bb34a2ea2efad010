//! Resizable array with constant worst-case work per grow or shrink.
//!
//! Storage is split over two segments. `x` is the main segment and `y`, when
//! present, is the copy under construction. Objects with index below `sx`
//! live in `x`; the rest live in `y` at their own index.
//!
//! Doubling starts when `x` is full. Halving starts once three eighths or
//! less of `x` is in use. Every call moves up to [`STEP`] objects, so a copy
//! finishes before the size leaves [cap/4, cap/2] (halving) or
//! [3cap/4, 2cap] (doubling). Allocation therefore stays within 6 times the
//! size, and a copy has always finished before the next one is due.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RangeError {
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("shrink of an empty array")]
    Empty,
}

/// Objects moved per grow or shrink while a copy is running.
pub const STEP: usize = 4;

#[derive(Debug, Clone)]
pub struct ResizableArray<T> {
    x: Vec<Option<T>>,
    sx: usize,
    y: Option<Vec<Option<T>>>,
    len: usize,
    last_work: usize,
}

fn segment<T>(cap: usize) -> Vec<Option<T>> {
    let mut v = Vec::with_capacity(cap);
    v.resize_with(cap, || None);
    v
}

impl<T> Default for ResizableArray<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> ResizableArray<T> {
    pub fn new() -> Self {
        ResizableArray { x: segment(1), sx: 0, y: None, len: 0, last_work: 0 }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Capacity of the main segment.
    pub fn capacity(&self) -> usize {
        self.x.len()
    }

    /// Capacity of the segment under construction, if a copy is running.
    pub fn copy_capacity(&self) -> Option<usize> {
        self.y.as_ref().map(Vec::len)
    }

    pub fn copying(&self) -> bool {
        self.y.is_some()
    }

    /// Objects allocated across both segments.
    pub fn allocated(&self) -> usize {
        self.x.len() + self.copy_capacity().unwrap_or(0)
    }

    /// Objects moved between segments by the most recent grow or shrink.
    pub fn last_work(&self) -> usize {
        self.last_work
    }

    pub fn get(&self, i: usize) -> Result<&T, RangeError> {
        self.slot(i).ok_or(RangeError::Index { index: i, len: self.len })
    }

    pub fn get_mut(&mut self, i: usize) -> Result<&mut T, RangeError> {
        let len = self.len;
        if i >= len {
            return Err(RangeError::Index { index: i, len });
        }
        let cell = if i < self.sx {
            &mut self.x[i]
        } else {
            &mut self.y.as_mut().expect("copy segment")[i]
        };
        Ok(cell.as_mut().expect("live slot"))
    }

    fn slot(&self, i: usize) -> Option<&T> {
        if i >= self.len {
            return None;
        }
        if i < self.sx {
            self.x[i].as_ref()
        } else {
            self.y.as_ref()?[i].as_ref()
        }
    }

    /// Appends `value` at index `len()`.
    pub fn grow(&mut self, value: T) {
        self.last_work = 0;
        if self.y.is_none() {
            if self.sx < self.x.len() {
                self.x[self.sx] = Some(value);
                self.sx += 1;
                self.len += 1;
                return;
            }
            self.y = Some(segment(2 * self.x.len()));
        }
        let y = self.y.as_mut().expect("copy segment");
        y[self.len] = Some(value);
        self.len += 1;
        self.copy_down(STEP);
    }

    /// Removes and returns the object at index `len() - 1`.
    pub fn shrink(&mut self) -> Result<T, RangeError> {
        self.last_work = 0;
        if self.len == 0 {
            return Err(RangeError::Empty);
        }
        let last = self.len - 1;
        let value = if last >= self.sx {
            self.y.as_mut().expect("copy segment")[last].take()
        } else {
            self.sx -= 1;
            self.x[last].take()
        };
        self.len -= 1;
        if self.y.is_none() {
            let cap = self.x.len();
            if cap >= 4 && 8 * self.sx <= 3 * cap {
                self.y = Some(segment(cap / 2));
            }
        }
        if self.y.is_some() {
            self.copy_down(STEP);
        }
        Ok(value.expect("live slot"))
    }

    fn copy_down(&mut self, k: usize) {
        let y = self.y.as_mut().expect("copy segment");
        for _ in 0..k {
            if self.sx == 0 {
                break;
            }
            self.sx -= 1;
            y[self.sx] = self.x[self.sx].take();
            self.last_work += 1;
        }
        if self.sx == 0 {
            self.x = self.y.take().expect("copy segment");
            self.sx = self.len;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        (0..self.len).map(move |i| self.slot(i).expect("live slot"))
    }
}
