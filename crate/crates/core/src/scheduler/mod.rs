//! Prompt eligibility: daily windows plus a sliding-window occurrence cap,
//! backed by a per-(participant, question) log of prompt times.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Schedule, SurveySchema, TimeOfDay, UnknownTopic, SECONDS_PER_DAY};
use crate::Timestamp;

/// A point in time as seen by one participant: the absolute instant plus the
/// participant's local time of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalInstant {
    pub epoch: Timestamp,
    pub time_of_day: TimeOfDay,
}

impl LocalInstant {
    /// Local time of day for a participant `utc_offset_minutes` east of UTC.
    pub fn from_utc(epoch: Timestamp, utc_offset_minutes: i32) -> LocalInstant {
        let local = epoch + i64::from(utc_offset_minutes) * 60;
        let tod = local.rem_euclid(i64::from(SECONDS_PER_DAY)) as u32;
        LocalInstant {
            epoch,
            time_of_day: TimeOfDay(tod),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EligibilityReason {
    Ok,
    OutsideDailyWindow,
    OccurrenceCapReached,
    NoScheduleAlwaysOk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityResult {
    pub eligible: bool,
    pub reason: EligibilityReason,
}

impl EligibilityResult {
    fn of(reason: EligibilityReason) -> Self {
        EligibilityResult {
            eligible: matches!(reason, EligibilityReason::Ok | EligibilityReason::NoScheduleAlwaysOk),
            reason,
        }
    }
}

/// Prompts recorded in the half-open window `(now - interval, now]`.
pub fn prompts_in_window(history: &[Timestamp], now: Timestamp, interval: u64) -> usize {
    let floor = now.saturating_sub(interval.min(i64::MAX as u64) as i64);
    // history is strictly increasing: binary search both ends
    let lo = history.partition_point(|&t| t <= floor);
    let hi = history.partition_point(|&t| t <= now);
    hi.saturating_sub(lo)
}

/// Whether a question under `schedule` may be prompted at `now`.
///
/// The daily window is `[start, end)` in local time. At most
/// `max_number_of_occurrence` prompts may fall in any window
/// `(t - occurrence_interval, t]`; `history` must be strictly increasing.
pub fn is_eligible(schedule: Option<&Schedule>, now: LocalInstant, history: &[Timestamp]) -> EligibilityResult {
    let Some(s) = schedule else {
        return EligibilityResult::of(EligibilityReason::NoScheduleAlwaysOk);
    };
    if now.time_of_day < s.daily_window_start || now.time_of_day >= s.daily_window_end {
        return EligibilityResult::of(EligibilityReason::OutsideDailyWindow);
    }
    if prompts_in_window(history, now.epoch, s.occurrence_interval) >= s.max_number_of_occurrence as usize {
        return EligibilityResult::of(EligibilityReason::OccurrenceCapReached);
    }
    EligibilityResult::of(EligibilityReason::Ok)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("prompt at {attempted} for ({participant}, {question}) is not after the last recorded prompt at {last}")]
pub struct MonotonicityError {
    pub participant: String,
    pub question: String,
    pub last: Timestamp,
    pub attempted: Timestamp,
}

/// One line of the persisted attempt log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub participant: String,
    pub question: String,
    pub ts: Timestamp,
}

/// Prompt timestamps per (participant, question), each list strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttemptLog {
    entries: BTreeMap<(String, String), Vec<Timestamp>>,
}

impl AttemptLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn history(&self, participant: &str, question: &str) -> &[Timestamp] {
        self.entries
            .get(&(participant.to_owned(), question.to_owned()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Appends a prompt time; it must be strictly later than the last one for the key.
    pub fn record_prompt(&mut self, participant: &str, question: &str, now: Timestamp) -> Result<(), MonotonicityError> {
        let list = self
            .entries
            .entry((participant.to_owned(), question.to_owned()))
            .or_default();
        if let Some(&last) = list.last() {
            if now <= last {
                return Err(MonotonicityError {
                    participant: participant.to_owned(),
                    question: question.to_owned(),
                    last,
                    attempted: now,
                });
            }
        }
        list.push(now);
        Ok(())
    }

    pub fn records(&self) -> impl Iterator<Item = AttemptRecord> + '_ {
        self.entries.iter().flat_map(|((p, q), ts)| {
            ts.iter().map(move |&ts| AttemptRecord {
                participant: p.clone(),
                question: q.clone(),
                ts,
            })
        })
    }

    /// Rebuilds a log from persisted records, in file order.
    pub fn from_records<I>(records: I) -> Result<AttemptLog, MonotonicityError>
    where
        I: IntoIterator<Item = AttemptRecord>,
    {
        let mut log = AttemptLog::new();
        for r in records {
            log.record_prompt(&r.participant, &r.question, r.ts)?;
        }
        Ok(log)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Eligibility of every root of a topic, in authored order.
pub fn root_eligibility<'a>(
    schema: &'a SurveySchema,
    topic_id: &str,
    participant: &str,
    now: LocalInstant,
    log: &AttemptLog,
) -> Result<Vec<(&'a str, EligibilityResult)>, UnknownTopic> {
    let topic = schema.topic(topic_id).ok_or_else(|| UnknownTopic(topic_id.to_owned()))?;
    Ok(topic
        .root_question_ids
        .iter()
        .map(|root| {
            let schedule = schema.node(root).and_then(|n| schema.schedule_for(n));
            (root.as_str(), is_eligible(schedule, now, log.history(participant, root)))
        })
        .collect())
}

/// The topic's roots that may be prompted now, in authored order.
pub fn eligible_roots(
    schema: &SurveySchema,
    topic_id: &str,
    participant: &str,
    now: LocalInstant,
    log: &AttemptLog,
) -> Result<Vec<String>, UnknownTopic> {
    Ok(root_eligibility(schema, topic_id, participant, now, log)?
        .into_iter()
        .filter(|(_, r)| r.eligible)
        .map(|(id, _)| id.to_owned())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly_twice() -> Schedule {
        Schedule {
            id: "s".into(),
            daily_window_start: TimeOfDay(0),
            daily_window_end: TimeOfDay(SECONDS_PER_DAY),
            occurrence_interval: 3600,
            max_number_of_occurrence: 2,
        }
    }

    fn at(epoch: Timestamp) -> LocalInstant {
        LocalInstant::from_utc(epoch, 0)
    }

    #[test]
    fn twice_per_hour() {
        let t0 = 1_700_000_000;
        let s = hourly_twice();
        let history = [t0, t0 + 100];
        let r = is_eligible(Some(&s), at(t0 + 200), &history);
        assert_eq!(r, EligibilityResult { eligible: false, reason: EligibilityReason::OccurrenceCapReached });
        assert!(!is_eligible(Some(&s), at(t0 + 3599), &history).eligible);
        // window (now - 3600, now] no longer holds t0
        assert!(is_eligible(Some(&s), at(t0 + 3600), &history).eligible);
        assert!(is_eligible(Some(&s), at(t0 + 3601), &history).eligible);
    }

    #[test]
    fn no_schedule_is_always_ok() {
        let r = is_eligible(None, at(0), &[]);
        assert_eq!(r, EligibilityResult { eligible: true, reason: EligibilityReason::NoScheduleAlwaysOk });
    }

    #[test]
    fn window_start_inclusive_end_exclusive() {
        let s = Schedule {
            daily_window_start: TimeOfDay::hms(9, 0, 0),
            daily_window_end: TimeOfDay::hms(17, 0, 0),
            ..hourly_twice()
        };
        let day = 19_000 * 86_400;
        let check = |tod: TimeOfDay| is_eligible(Some(&s), at(day + tod.0 as i64), &[]).reason;
        assert_eq!(check(TimeOfDay::hms(8, 59, 59)), EligibilityReason::OutsideDailyWindow);
        assert_eq!(check(TimeOfDay::hms(9, 0, 0)), EligibilityReason::Ok);
        assert_eq!(check(TimeOfDay::hms(16, 59, 59)), EligibilityReason::Ok);
        assert_eq!(check(TimeOfDay::hms(17, 0, 0)), EligibilityReason::OutsideDailyWindow);
    }

    #[test]
    fn local_time_uses_offset() {
        // 2023-11-14T22:13:20Z
        let epoch = 1_700_000_000;
        assert_eq!(LocalInstant::from_utc(epoch, 0).time_of_day.to_string(), "22:13:20");
        assert_eq!(LocalInstant::from_utc(epoch, -480).time_of_day.to_string(), "14:13:20");
        assert_eq!(LocalInstant::from_utc(epoch, 120).time_of_day.to_string(), "00:13:20");
    }

    #[test]
    fn record_prompt_requires_strict_increase() {
        let mut log = AttemptLog::new();
        log.record_prompt("p1", "q1", 100).unwrap();
        assert_eq!(log.history("p1", "q1"), &[100]);
        let e = log.record_prompt("p1", "q1", 100).unwrap_err();
        assert_eq!((e.last, e.attempted), (100, 100));
        log.record_prompt("p1", "q1", 105).unwrap();
        assert_eq!(log.history("p1", "q1"), &[100, 105]);
        // other keys are independent
        log.record_prompt("p2", "q1", 1).unwrap();
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn records_round_trip_jsonl() {
        let mut log = AttemptLog::new();
        log.record_prompt("p1", "q3", 1_700_000_000).unwrap();
        let line = serde_json::to_string(&log.records().next().unwrap()).unwrap();
        assert_eq!(line, r#"{"participant":"p1","question":"q3","ts":1700000000}"#);
        let back = AttemptLog::from_records(vec![serde_json::from_str(&line).unwrap()]).unwrap();
        assert_eq!(back, log);
    }
}
