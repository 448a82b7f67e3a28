use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::records::PredictionRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Focus {
    Device,
    Environment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub focus: Focus,
    pub start: f64,
    pub end: f64,
}

impl Block {
    pub fn new(focus: Focus, start: f64, end: f64) -> Self {
        Self { focus, start, end }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Alternating device/environment blocks of one session segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub session_id: String,
    pub blocks: Vec<Block>,
}

impl Timeline {
    /// Builds a timeline from blocks, checking order and merging equal neighbours.
    pub fn from_blocks(session_id: &str, blocks: Vec<Block>) -> Result<Self> {
        let mut out: Vec<Block> = Vec::with_capacity(blocks.len());
        for b in blocks {
            if !(b.start < b.end) {
                return Err(Error::InvalidInput(format!("block [{}, {}) is empty", b.start, b.end)));
            }
            if let Some(last) = out.last_mut() {
                if b.start < last.end {
                    return Err(Error::InvalidInput("blocks overlap or are unsorted".into()));
                }
                if last.focus == b.focus {
                    last.end = b.end;
                    continue;
                }
            }
            out.push(b);
        }
        Ok(Self {
            session_id: session_id.to_string(),
            blocks: out,
        })
    }

    /// Total covered time.
    pub fn duration(&self) -> f64 {
        self.blocks.iter().map(Block::duration).sum()
    }
}

/// Turns per-frame predictions into timelines. Each frame holds its
/// prediction for min(time to the next frame, `max_frame_span`); a sampling
/// gap above `max_gap` starts a new timeline; runs of equal focus merge into
/// one block that spans the run.
pub fn build_timeline(frames: &[PredictionRecord], max_frame_span: f64, max_gap: f64) -> Result<Vec<Timeline>> {
    if !(max_frame_span > 0.0 && max_gap > 0.0) {
        return Err(Error::InvalidInput("max_frame_span and max_gap must be positive".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut by_session: HashMap<&str, Vec<&PredictionRecord>> = HashMap::new();
    for f in frames {
        let list = by_session.entry(f.session_id.as_str()).or_insert_with(|| {
            order.push(f.session_id.as_str());
            Vec::new()
        });
        if let Some(prev) = list.last() {
            if !(f.t > prev.t) {
                return Err(Error::Session {
                    session: f.session_id.clone(),
                    msg: format!("frames not sorted: {} after {}", f.t, prev.t),
                });
            }
        }
        list.push(f);
    }

    let mut out = Vec::new();
    for sid in order {
        let list = &by_session[sid];
        let mut blocks: Vec<Block> = Vec::new();
        for (i, f) in list.iter().enumerate() {
            let focus = if f.prediction.is_positive() { Focus::Device } else { Focus::Environment };
            let next_gap = list.get(i + 1).map(|n| n.t - f.t);
            let span = next_gap.map_or(max_frame_span, |g| g.min(max_frame_span));
            let end = f.t + span;
            match blocks.last_mut() {
                Some(last) if last.focus == focus => last.end = end,
                _ => blocks.push(Block::new(focus, f.t, end)),
            }
            if next_gap.is_some_and(|g| g > max_gap) {
                out.push(Timeline {
                    session_id: sid.to_string(),
                    blocks: std::mem::take(&mut blocks),
                });
            }
        }
        if !blocks.is_empty() {
            out.push(Timeline {
                session_id: sid.to_string(),
                blocks,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpanStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub total: f64,
}

impl SpanStats {
    fn from_durations(d: &[f64]) -> Self {
        if d.is_empty() {
            return Self::default();
        }
        let total: f64 = d.iter().sum();
        Self {
            count: d.len(),
            mean: total / d.len() as f64,
            min: d.iter().copied().fold(f64::INFINITY, f64::min),
            max: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            total,
        }
    }

    fn merge(&self, o: &Self) -> Self {
        if self.count == 0 {
            return *o;
        }
        if o.count == 0 {
            return *self;
        }
        let count = self.count + o.count;
        let total = self.total + o.total;
        Self {
            count,
            mean: total / count as f64,
            min: self.min.min(o.min),
            max: self.max.max(o.max),
            total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimaryFocus {
    Device,
    Environment,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub glance_max: f64,
    pub glances: usize,
    pub shifts_env_to_dev: usize,
    pub shifts_dev_to_env: usize,
    pub device: SpanStats,
    pub environment: SpanStats,
    pub primary_focus: PrimaryFocus,
}

fn primary(device: f64, env: f64) -> PrimaryFocus {
    if device > env {
        PrimaryFocus::Device
    } else if env > device {
        PrimaryFocus::Environment
    } else {
        PrimaryFocus::Tie
    }
}

/// Glances are device blocks no longer than `glance_max` seconds.
pub fn attention_report(tl: &Timeline, glance_max: f64) -> AttentionReport {
    let dur = |f: Focus| -> Vec<f64> {
        tl.blocks.iter().filter(|b| b.focus == f).map(Block::duration).collect()
    };
    let dev = dur(Focus::Device);
    let env = dur(Focus::Environment);
    let mut to_dev = 0;
    let mut to_env = 0;
    for w in tl.blocks.windows(2) {
        match (w[0].focus, w[1].focus) {
            (Focus::Environment, Focus::Device) => to_dev += 1,
            (Focus::Device, Focus::Environment) => to_env += 1,
            _ => {}
        }
    }
    let device = SpanStats::from_durations(&dev);
    let environment = SpanStats::from_durations(&env);
    AttentionReport {
        session_id: Some(tl.session_id.clone()),
        glance_max,
        glances: dev.iter().filter(|&&d| d <= glance_max).count(),
        shifts_env_to_dev: to_dev,
        shifts_dev_to_env: to_env,
        primary_focus: primary(device.total, environment.total),
        device,
        environment,
    }
}

/// Sums counts and totals over several reports; span statistics pool all blocks.
pub fn aggregate_reports(reports: &[AttentionReport], glance_max: f64) -> AttentionReport {
    let mut agg = AttentionReport {
        session_id: None,
        glance_max,
        glances: 0,
        shifts_env_to_dev: 0,
        shifts_dev_to_env: 0,
        device: SpanStats::default(),
        environment: SpanStats::default(),
        primary_focus: PrimaryFocus::Tie,
    };
    for r in reports {
        agg.glances += r.glances;
        agg.shifts_env_to_dev += r.shifts_env_to_dev;
        agg.shifts_dev_to_env += r.shifts_dev_to_env;
        agg.device = agg.device.merge(&r.device);
        agg.environment = agg.environment.merge(&r.environment);
    }
    agg.primary_focus = primary(agg.device.total, agg.environment.total);
    agg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::Label;

    fn pred(t: f64, device: bool) -> PredictionRecord {
        PredictionRecord {
            session_id: "s".into(),
            participant_id: "p".into(),
            t,
            prediction: Label::from_positive(device),
            score: None,
            truth: None,
            illumination: None,
        }
    }

    #[test]
    fn merges_runs() {
        let tl = build_timeline(&[pred(0.0, true), pred(1.0, true), pred(2.0, false)], 1.0, 10.0).unwrap();
        assert_eq!(tl.len(), 1);
        assert_eq!(
            tl[0].blocks,
            vec![Block::new(Focus::Device, 0.0, 2.0), Block::new(Focus::Environment, 2.0, 3.0)]
        );
    }

    #[test]
    fn single_frame() {
        let tl = build_timeline(&[pred(5.0, false)], 1.0, 10.0).unwrap();
        assert_eq!(tl[0].blocks, vec![Block::new(Focus::Environment, 5.0, 6.0)]);
    }

    #[test]
    fn long_gap_splits() {
        let tl = build_timeline(&[pred(0.0, true), pred(100.0, true)], 1.0, 10.0).unwrap();
        assert_eq!(tl.len(), 2);
    }

    #[test]
    fn unsorted_rejected() {
        assert!(build_timeline(&[pred(1.0, true), pred(0.5, true)], 1.0, 10.0).is_err());
    }

    #[test]
    fn report_cases() {
        let tl = Timeline::from_blocks("s", vec![Block::new(Focus::Device, 0.0, 10.0)]).unwrap();
        let r = attention_report(&tl, 1.5);
        assert_eq!((r.glances, r.shifts_dev_to_env, r.shifts_env_to_dev), (0, 0, 0));
        assert_eq!(r.primary_focus, PrimaryFocus::Device);

        let tl = Timeline::from_blocks(
            "s",
            vec![Block::new(Focus::Device, 0.0, 2.0), Block::new(Focus::Environment, 2.0, 4.0)],
        )
        .unwrap();
        assert_eq!(attention_report(&tl, 1.5).primary_focus, PrimaryFocus::Tie);

        let empty = Timeline::from_blocks("s", vec![]).unwrap();
        let r = attention_report(&empty, 1.5);
        assert_eq!(r.glances, 0);
        assert_eq!(r.device, SpanStats::default());
        assert_eq!(r.primary_focus, PrimaryFocus::Tie);
    }

    #[test]
    fn from_blocks_validates() {
        assert!(Timeline::from_blocks("s", vec![Block::new(Focus::Device, 1.0, 1.0)]).is_err());
        assert!(Timeline::from_blocks(
            "s",
            vec![Block::new(Focus::Device, 0.0, 2.0), Block::new(Focus::Environment, 1.0, 3.0)]
        )
        .is_err());
    }
}
