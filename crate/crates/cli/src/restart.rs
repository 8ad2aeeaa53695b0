//! Running a fixed-horizon learner over a longer stream by restarting it.

use swapregret::{ActionDistribution, Error, Learner, Result, RewardVector};

/// A learner that hands each block of `segment` days to a fresh instance
/// built by the factory. The factory receives the segment index.
pub struct Restarting<L, F> {
    factory: F,
    segment: u64,
    total: u64,
    day: u64,
    n: usize,
    current: Option<(u64, L)>,
}

/// Wraps `factory` so that a new learner starts every `segment` days, for
/// `total` days overall.
pub fn restart_wrapper<L, F>(mut factory: F, segment: u64, total: u64) -> Result<Restarting<L, F>>
where
    L: Learner,
    F: FnMut(u64) -> Result<L>,
{
    if segment == 0 {
        return Err(Error::Parameter("segment length must be >= 1".into()));
    }
    let first = factory(0)?;
    Ok(Restarting {
        factory,
        segment,
        total,
        day: 0,
        n: first.n(),
        current: Some((0, first)),
    })
}

impl<L, F> Restarting<L, F>
where
    L: Learner,
    F: FnMut(u64) -> Result<L>,
{
    pub fn day(&self) -> u64 {
        self.day
    }

    /// Number of learner instances created so far.
    pub fn segments_started(&self) -> u64 {
        self.current.as_ref().map_or(0, |(k, _)| k + 1)
    }

    fn learner(&mut self) -> Result<&mut L> {
        if self.day >= self.total {
            return Err(Error::Lifecycle(format!("restarted learner ran past {} days", self.total)));
        }
        let index = self.day / self.segment;
        if self.current.as_ref().is_none_or(|(k, _)| *k != index) {
            let fresh = (self.factory)(index)?;
            if fresh.n() != self.n {
                return Err(Error::Dimension {
                    expected: self.n,
                    found: fresh.n(),
                });
            }
            self.current = Some((index, fresh));
        }
        Ok(&mut self.current.as_mut().expect("set above").1)
    }
}

impl<L, F> Learner for Restarting<L, F>
where
    L: Learner,
    F: FnMut(u64) -> Result<L>,
{
    fn n(&self) -> usize {
        self.n
    }

    fn act(&mut self) -> Result<ActionDistribution> {
        self.learner()?.act()
    }

    fn update(&mut self, reward: &RewardVector) -> Result<()> {
        self.learner()?.update(reward)?;
        self.day += 1;
        Ok(())
    }
}
