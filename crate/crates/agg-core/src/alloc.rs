use std::cell::Cell;
use std::rc::Rc;

use crate::error::CoreError;
use crate::frame::Frame;

#[derive(Debug)]
pub(crate) struct Pool {
    budget: usize,
    frame_size: usize,
    outstanding: Cell<usize>,
    high_water: Cell<usize>,
    granted: Cell<u64>,
}

impl Pool {
    pub(crate) fn release(&self) {
        self.outstanding.set(self.outstanding.get() - 1);
    }
}

/// Hands out zeroed frames while enforcing the budget `M`.
///
/// Cloning yields another handle on the same pool. Frames return to the pool
/// when dropped.
#[derive(Debug, Clone)]
pub struct FrameAllocator {
    pool: Rc<Pool>,
}

impl FrameAllocator {
    pub fn new(budget: usize, frame_size: usize) -> Self {
        assert!(frame_size > crate::FRAME_HEADER + 2, "frame size too small");
        Self {
            pool: Rc::new(Pool {
                budget,
                frame_size,
                outstanding: Cell::new(0),
                high_water: Cell::new(0),
                granted: Cell::new(0),
            }),
        }
    }

    pub fn allocate(&self) -> Result<Frame, CoreError> {
        let held = self.pool.outstanding.get();
        if held >= self.pool.budget {
            return Err(CoreError::BudgetExhausted { budget: self.pool.budget });
        }
        self.pool.outstanding.set(held + 1);
        if held + 1 > self.pool.high_water.get() {
            self.pool.high_water.set(held + 1);
        }
        self.pool.granted.set(self.pool.granted.get() + 1);
        Ok(Frame::leased(self.pool.frame_size, Rc::clone(&self.pool)))
    }

    /// Returns a frame to the pool. Equivalent to dropping it.
    pub fn release(&self, frame: Frame) {
        drop(frame);
    }

    pub fn budget(&self) -> usize {
        self.pool.budget
    }

    pub fn frame_size(&self) -> usize {
        self.pool.frame_size
    }

    pub fn outstanding(&self) -> usize {
        self.pool.outstanding.get()
    }

    pub fn available(&self) -> usize {
        self.pool.budget - self.pool.outstanding.get()
    }

    /// Largest number of frames ever held at once.
    pub fn high_water(&self) -> usize {
        self.pool.high_water.get()
    }

    pub fn total_granted(&self) -> u64 {
        self.pool.granted.get()
    }

    /// Builds a frame outside the budget, e.g. for caller-owned input.
    pub fn unmanaged(&self) -> Frame {
        Frame::new(self.pool.frame_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grant_within_budget() {
        let a = FrameAllocator::new(4, 64);
        let held: Vec<_> = (0..3).map(|_| a.allocate().unwrap()).collect();
        let f = a.allocate().unwrap();
        assert_eq!(a.outstanding(), 4);
        assert!(f.bytes().iter().skip(crate::FRAME_HEADER).all(|&b| b == 0));
        drop(held);
    }

    #[test]
    fn at_budget_errors() {
        let a = FrameAllocator::new(4, 64);
        let _held: Vec<_> = (0..4).map(|_| a.allocate().unwrap()).collect();
        assert!(matches!(a.allocate(), Err(CoreError::BudgetExhausted { budget: 4 })));
    }

    #[test]
    fn second_of_one_fails() {
        let a = FrameAllocator::new(1, 64);
        let _f = a.allocate().unwrap();
        assert!(a.allocate().is_err());
    }

    #[test]
    fn release_returns_frame() {
        let a = FrameAllocator::new(1, 64);
        let f = a.allocate().unwrap();
        a.release(f);
        assert_eq!(a.outstanding(), 0);
        assert!(a.allocate().is_ok());
        assert_eq!(a.high_water(), 1);
    }
}
