//! Manipulation skill playback with a success signal and reactions to
//! human disturbance.

use crate::skillspec::{DisturbancePolicy, SkillDef, SkillId};

use super::motion::Frame;

/// Consecutive ticks the success signal must stay at or above one half.
pub const SUCCESS_STREAK: u32 = 3;
/// Approach phase of periodic skills before the repeating part begins.
pub const PERIODIC_LEAD_IN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManipStatus {
    Running(f64),
    Succeeded,
}

/// Plays a joint-space trajectory. `frames[0]` is the pose at start and
/// `frames[k]` the pose after `k` advancing ticks.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipExecutor {
    pub skill: SkillId,
    frames: Vec<Frame>,
    progress: usize,
    success_tail: usize,
    periodic: bool,
    policy: DisturbancePolicy,
    signal: f64,
    streak: u32,
    withdrawing: bool,
    paused: bool,
    rollback: bool,
}

impl ManipExecutor {
    pub fn new(skill: &SkillDef, frames: Vec<Frame>) -> Self {
        assert!(frames.len() >= 2, "a trajectory needs a start and an end");
        Self {
            skill: skill.id,
            frames,
            progress: 0,
            success_tail: skill.success_tail_ticks as usize,
            periodic: skill.periodic,
            policy: skill.disturbance,
            signal: 0.0,
            streak: 0,
            withdrawing: false,
            paused: false,
            rollback: false,
        }
    }

    /// Undoes `original` by replaying its traversed prefix backwards, then
    /// holding the start pose for the success tail of `reverse`.
    pub fn rollback_of(original: &ManipExecutor, reverse: &SkillDef) -> Self {
        let mut frames: Vec<Frame> = original.frames[..=original.progress.min(original.frames.len() - 1)]
            .iter()
            .rev()
            .cloned()
            .collect();
        let tail = reverse.success_tail_ticks as usize;
        let last = frames.last().cloned().expect("prefix holds the start pose");
        frames.extend(std::iter::repeat_n(last, tail.saturating_sub(1)));
        if frames.len() < 2 {
            frames.push(frames[0].clone());
        }
        Self {
            skill: reverse.id,
            frames,
            progress: 0,
            success_tail: tail,
            periodic: false,
            policy: reverse.disturbance,
            signal: 0.0,
            streak: 0,
            withdrawing: false,
            paused: false,
            rollback: true,
        }
    }

    /// Ticks of nominal playback.
    pub fn nominal(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn progress(&self) -> usize {
        self.progress
    }

    pub fn signal(&self) -> f64 {
        self.signal
    }

    pub fn is_withdrawing(&self) -> bool {
        self.withdrawing
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn is_rollback(&self) -> bool {
        self.rollback
    }

    fn index(&self) -> usize {
        let n = self.nominal();
        if self.periodic && self.progress > n {
            let lead = PERIODIC_LEAD_IN.min(n - 1);
            lead + 1 + (self.progress - lead - 1) % (n - lead)
        } else {
            self.progress.min(n)
        }
    }

    pub fn frame(&self) -> &Frame {
        &self.frames[self.index()]
    }

    /// Success label of the nominal trajectory: one over its final
    /// `success_tail` ticks, zero before. Periodic skills never finish.
    pub fn tail_signal(&self, progress: usize) -> f64 {
        if self.periodic || progress == 0 {
            return 0.0;
        }
        let n = self.nominal();
        if progress + self.success_tail > n {
            1.0
        } else {
            0.0
        }
    }

    /// One tick of execution. Human contact pauses or withdraws according
    /// to the skill's policy and keeps the signal at zero.
    pub fn advance(&mut self, contact: bool) -> ManipStatus {
        if contact {
            self.paused = self.policy == DisturbancePolicy::PauseInPlace;
            self.withdrawing = self.policy == DisturbancePolicy::Withdraw;
            if self.withdrawing {
                self.progress = self.index().saturating_sub(1);
            }
            self.signal = 0.0;
            self.streak = 0;
            return ManipStatus::Running(0.0);
        }
        self.paused = false;
        self.withdrawing = false;
        self.progress += 1;
        self.signal = self.tail_signal(self.progress);
        if self.signal >= 0.5 {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        if self.streak >= SUCCESS_STREAK {
            ManipStatus::Succeeded
        } else {
            ManipStatus::Running(self.signal)
        }
    }
}
