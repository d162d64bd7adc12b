/// Outcome of feeding one epoch's validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Waiting,
    Stop,
}

/// Patience-based early stopping on validation loss (lower is better,
/// strict improvement required).
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience: patience.max(1), best: None, stale: 0 }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Progress {
        match self.best {
            // NaN never counts as an improvement
            Some((_, best)) if loss.is_nan() || loss >= best => {
                self.stale += 1;
                if self.stale >= self.patience {
                    Progress::Stop
                } else {
                    Progress::Waiting
                }
            }
            _ => {
                self.best = Some((epoch, loss));
                self.stale = 0;
                Progress::Improved
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|(_, l)| l)
    }
}
