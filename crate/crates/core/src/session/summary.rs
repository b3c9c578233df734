use super::{Condition, IosRecord, TrialRecord, TrialStatus};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatingStats {
    pub mean: f64,
    pub median: f64,
}

impl RatingStats {
    fn of(values: &[u8]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        let mean = sorted.iter().map(|v| f64::from(*v)).sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            f64::from(sorted[n / 2])
        } else {
            (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2])) / 2.0
        };
        Some(RatingStats { mean, median })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub trials: usize,
    pub skipped: usize,
    pub valence: Option<RatingStats>,
    pub arousal: Option<RatingStats>,
}

/// How many times each rating was given for one phrase under one condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhraseCounts {
    pub phrase_id: u32,
    pub condition: Condition,
    pub valence: BTreeMap<u8, usize>,
    pub arousal: BTreeMap<u8, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IosSummary {
    pub condition: Condition,
    pub count: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SummaryReport {
    pub conditions: Vec<ConditionSummary>,
    pub phrases: Vec<PhraseCounts>,
    pub ios: Vec<IosSummary>,
}

impl SummaryReport {
    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty() && self.phrases.is_empty() && self.ios.is_empty()
    }

    pub fn condition(&self, c: Condition) -> Option<&ConditionSummary> {
        self.conditions.iter().find(|s| s.condition == c)
    }

    pub fn phrase(&self, phrase_id: u32, c: Condition) -> Option<&PhraseCounts> {
        self.phrases.iter().find(|p| p.phrase_id == phrase_id && p.condition == c)
    }

    pub fn ios(&self, c: Condition) -> Option<&IosSummary> {
        self.ios.iter().find(|s| s.condition == c)
    }
}

/// Per-condition SAM statistics, per-phrase rating counts and mean IOS.
/// Only completed trials contribute ratings; skipped ones are counted.
pub fn summarize(records: &[TrialRecord], ios: &[IosRecord]) -> SummaryReport {
    #[derive(Default)]
    struct Acc {
        valence: Vec<u8>,
        arousal: Vec<u8>,
        skipped: usize,
    }
    let mut by_condition: BTreeMap<Condition, Acc> = BTreeMap::new();
    type Counts = BTreeMap<u8, usize>;
    let mut by_phrase: BTreeMap<(u32, Condition), (Counts, Counts)> = BTreeMap::new();

    for r in records {
        match r.status {
            TrialStatus::Skipped => by_condition.entry(r.condition).or_default().skipped += 1,
            TrialStatus::Pending => {}
            TrialStatus::Completed => {
                let (Some(v), Some(a)) = (r.sam_valence, r.sam_arousal) else {
                    continue;
                };
                let acc = by_condition.entry(r.condition).or_default();
                acc.valence.push(v);
                acc.arousal.push(a);
                let counts = by_phrase.entry((r.phrase_id, r.condition)).or_default();
                *counts.0.entry(v).or_default() += 1;
                *counts.1.entry(a).or_default() += 1;
            }
        }
    }

    let mut ios_acc: BTreeMap<Condition, Vec<u8>> = BTreeMap::new();
    for r in ios {
        ios_acc.entry(r.condition).or_default().push(r.ios);
    }

    SummaryReport {
        conditions: by_condition
            .into_iter()
            .map(|(condition, acc)| ConditionSummary {
                condition,
                trials: acc.valence.len(),
                skipped: acc.skipped,
                valence: RatingStats::of(&acc.valence),
                arousal: RatingStats::of(&acc.arousal),
            })
            .collect(),
        phrases: by_phrase
            .into_iter()
            .map(|((phrase_id, condition), (valence, arousal))| PhraseCounts {
                phrase_id,
                condition,
                valence,
                arousal,
            })
            .collect(),
        ios: ios_acc
            .into_iter()
            .map(|(condition, v)| IosSummary {
                condition,
                count: v.len(),
                mean: v.iter().map(|x| f64::from(*x)).sum::<f64>() / v.len() as f64,
            })
            .collect(),
    }
}

/// Long-format CSV: `scope,condition,phrase_id,measure,statistic,value`.
pub fn write_summary_csv<W: Write>(report: &SummaryReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "condition", "phrase_id", "measure", "statistic", "value"])?;
    for c in &report.conditions {
        let cond = c.condition.as_str();
        w.write_record(["condition", cond, "", "sam", "trials", &c.trials.to_string()])?;
        w.write_record(["condition", cond, "", "sam", "skipped", &c.skipped.to_string()])?;
        for (measure, stats) in [("valence", c.valence), ("arousal", c.arousal)] {
            if let Some(s) = stats {
                w.write_record(["condition", cond, "", measure, "mean", &s.mean.to_string()])?;
                w.write_record(["condition", cond, "", measure, "median", &s.median.to_string()])?;
            }
        }
    }
    for p in &report.phrases {
        let id = p.phrase_id.to_string();
        for (measure, counts) in [("valence", &p.valence), ("arousal", &p.arousal)] {
            for (rating, n) in counts {
                w.write_record([
                    "phrase",
                    p.condition.as_str(),
                    &id,
                    measure,
                    &format!("count_{rating}"),
                    &n.to_string(),
                ])?;
            }
        }
    }
    for i in &report.ios {
        let cond = i.condition.as_str();
        w.write_record(["condition", cond, "", "ios", "count", &i.count.to_string()])?;
        w.write_record(["condition", cond, "", "ios", "mean", &i.mean.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;
    use proptest::prelude::*;

    fn rec(phrase_id: u32, condition: Condition, v: u8, a: u8) -> TrialRecord {
        TrialRecord {
            participant_id: "P01".into(),
            condition,
            phrase_id,
            status: TrialStatus::Completed,
            sam_valence: Some(v),
            sam_arousal: Some(a),
            vibration: None,
            skip_reason: None,
            timestamp: Utc::now(),
        }
    }

    #[test]
    fn empty_input() {
        assert!(summarize(&[], &[]).is_empty());
    }

    #[test]
    fn two_ratings_same_cell() {
        let r = summarize(
            &[rec(3, Condition::WithVibro, 4, 5), rec(3, Condition::WithVibro, 6, 5)],
            &[],
        );
        let c = r.condition(Condition::WithVibro).unwrap();
        assert_eq!(c.valence.unwrap().mean, 5.0);
        assert_eq!(c.valence.unwrap().median, 5.0);
        let counts = &r.phrase(3, Condition::WithVibro).unwrap().valence;
        assert_eq!(counts, &BTreeMap::from([(4, 1), (6, 1)]));
        assert!(r.condition(Condition::WithoutVibro).is_none());
    }

    #[test]
    fn csv_export() {
        let r = summarize(
            &[rec(1, Condition::WithoutVibro, 2, 8)],
            &[IosRecord::new("P01", Condition::WithoutVibro, 5).unwrap()],
        );
        let mut out = Vec::new();
        write_summary_csv(&r, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("scope,condition,phrase_id,measure,statistic,value\n"));
        assert!(text.contains("condition,without-vibro,,valence,mean,2\n"));
        assert!(text.contains("phrase,without-vibro,1,arousal,count_8,1\n"));
        assert!(text.contains("condition,without-vibro,,ios,mean,5\n"));
    }

    fn arb_record() -> impl Strategy<Value = TrialRecord> {
        (1u32..=4, any::<bool>(), 1u8..=9, 1u8..=9).prop_map(|(id, with, v, a)| {
            rec(id, if with { Condition::WithVibro } else { Condition::WithoutVibro }, v, a)
        })
    }

    proptest! {
        #[test]
        fn means_match_brute_force(records in proptest::collection::vec(arb_record(), 0..60)) {
            let report = summarize(&records, &[]);
            for c in Condition::ALL {
                let vals: Vec<f64> = records.iter().filter(|r| r.condition == c).map(|r| f64::from(r.sam_valence.unwrap())).collect();
                match report.condition(c) {
                    None => prop_assert!(vals.is_empty()),
                    Some(s) => {
                        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                        prop_assert!((s.valence.unwrap().mean - mean).abs() < 1e-9);
                        prop_assert_eq!(s.trials, vals.len());
                    }
                }
                for id in 1..=4 {
                    let n = records.iter().filter(|r| r.condition == c && r.phrase_id == id).count();
                    let total: usize = report.phrase(id, c).map_or(0, |p| p.valence.values().sum());
                    prop_assert_eq!(total, n);
                }
            }
        }
    }
}
