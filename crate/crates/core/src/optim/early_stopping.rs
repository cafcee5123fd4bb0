use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

/// Patience counter on a loss that should decrease.
///
/// Only strict improvements reset the counter.
#[derive(Debug, Clone)]
pub struct EarlyStopping<T> {
    patience: usize,
    best: Option<(usize, T)>,
    epochs_since_best: usize,
}

impl<T: Scalar> EarlyStopping<T> {
    pub fn new(patience: usize) -> Self {
        assert!(patience >= 1, "patience must be at least 1");
        Self {
            patience,
            best: None,
            epochs_since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: T) -> Verdict {
        match self.best {
            Some((_, best)) if loss >= best || loss.is_nan() => {
                self.epochs_since_best += 1;
                if self.epochs_since_best >= self.patience {
                    Verdict::Stop
                } else {
                    Verdict::Continue
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.epochs_since_best = 0;
                Verdict::Improved
            }
        }
    }

    pub fn best(&self) -> Option<(usize, T)> {
        self.best
    }

    pub fn epochs_since_best(&self) -> usize {
        self.epochs_since_best
    }
}
