//! Count-based and time-based tumbling windows over time-ordered comments.
//!
//! Windows borrow contiguous slices of the sorted input; both segmentation
//! modes only ever group neighbours in time order.

use serde::{Deserialize, Serialize};

use crate::scorer::ScoredComment;

pub const DAY_MS: i64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartialPolicy {
    Drop,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum WindowMode {
    Count {
        size: usize,
    },
    Time {
        duration_ms: i64,
        /// Defaults to the UTC midnight at or before the first comment.
        origin_ms: Option<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    #[serde(flatten)]
    pub mode: WindowMode,
    pub partial: PartialPolicy,
}

impl WindowSpec {
    pub fn count(size: usize) -> Self {
        WindowSpec {
            mode: WindowMode::Count { size },
            partial: PartialPolicy::Drop,
        }
    }

    pub fn time(duration_ms: i64) -> Self {
        WindowSpec {
            mode: WindowMode::Time {
                duration_ms,
                origin_ms: None,
            },
            partial: PartialPolicy::Drop,
        }
    }

    pub fn with_partial(mut self, partial: PartialPolicy) -> Self {
        self.partial = partial;
        self
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        match self.mode {
            WindowMode::Count { size: 0 } => Err(WindowError::ZeroSize),
            WindowMode::Time { duration_ms, .. } if duration_ms < 1 => Err(WindowError::ZeroDuration),
            _ => Ok(()),
        }
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::count(100)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("window size must be at least 1")]
    ZeroSize,
    #[error("window duration must be at least 1 ms")]
    ZeroDuration,
    #[error("comments are not sorted by timestamp (position {0})")]
    NotSorted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WindowBounds {
    /// Inclusive ordinals into the sorted comment sequence.
    Count { first_ordinal: usize, last_ordinal: usize },
    /// Half-open `[start_ms, end_ms)`.
    Time { start_ms: i64, end_ms: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<'a> {
    pub index: usize,
    pub members: &'a [ScoredComment],
    pub bounds: WindowBounds,
    /// Final count window shorter than the configured size.
    pub partial: bool,
    /// At least one empty time bucket precedes this window.
    pub gap_before: bool,
}

impl Window<'_> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Stable sort by timestamp; equal timestamps keep their input order.
pub fn sort_by_time(mut comments: Vec<ScoredComment>) -> Vec<ScoredComment> {
    comments.sort_by_key(|c| c.comment.timestamp_ms);
    comments
}

fn check_sorted(comments: &[ScoredComment]) -> Result<(), WindowError> {
    match comments
        .windows(2)
        .position(|w| w[1].comment.timestamp_ms < w[0].comment.timestamp_ms)
    {
        Some(pos) => Err(WindowError::NotSorted(pos + 1)),
        None => Ok(()),
    }
}

pub fn segment_count(
    comments: &[ScoredComment],
    size: usize,
    partial: PartialPolicy,
) -> Result<Vec<Window<'_>>, WindowError> {
    if size == 0 {
        return Err(WindowError::ZeroSize);
    }
    check_sorted(comments)?;
    Ok(comments
        .chunks(size)
        .enumerate()
        .filter(|(_, chunk)| chunk.len() == size || partial == PartialPolicy::Keep)
        .map(|(index, members)| Window {
            index,
            members,
            bounds: WindowBounds::Count {
                first_ordinal: index * size,
                last_ordinal: index * size + members.len() - 1,
            },
            partial: members.len() < size,
            gap_before: false,
        })
        .collect())
}

/// UTC midnight at or before `ts_ms`.
pub fn default_origin(ts_ms: i64) -> i64 {
    ts_ms - ts_ms.rem_euclid(DAY_MS)
}

/// Bucket number for a timestamp; buckets are half-open `[start, start + duration)`.
pub fn bucket_of(ts_ms: i64, origin_ms: i64, duration_ms: i64) -> i64 {
    (ts_ms - origin_ms).div_euclid(duration_ms)
}

pub fn segment_time(
    comments: &[ScoredComment],
    duration_ms: i64,
    origin_ms: Option<i64>,
) -> Result<Vec<Window<'_>>, WindowError> {
    if duration_ms < 1 {
        return Err(WindowError::ZeroDuration);
    }
    check_sorted(comments)?;
    let Some(first) = comments.first() else {
        return Ok(Vec::new());
    };
    let origin = origin_ms.unwrap_or_else(|| default_origin(first.comment.timestamp_ms));

    let mut windows = Vec::new();
    let mut start = 0;
    let mut prev_bucket: Option<i64> = None;
    while start < comments.len() {
        let bucket = bucket_of(comments[start].comment.timestamp_ms, origin, duration_ms);
        let len = comments[start..]
            .iter()
            .take_while(|c| bucket_of(c.comment.timestamp_ms, origin, duration_ms) == bucket)
            .count();
        let start_ms = origin + bucket * duration_ms;
        windows.push(Window {
            index: windows.len(),
            members: &comments[start..start + len],
            bounds: WindowBounds::Time {
                start_ms,
                end_ms: start_ms + duration_ms,
            },
            partial: false,
            gap_before: prev_bucket.is_some_and(|p| bucket > p + 1),
        });
        prev_bucket = Some(bucket);
        start += len;
    }
    Ok(windows)
}

/// Dispatches on `spec.mode`.
pub fn segment<'a>(comments: &'a [ScoredComment], spec: &WindowSpec) -> Result<Vec<Window<'a>>, WindowError> {
    match spec.mode {
        WindowMode::Count { size } => segment_count(comments, size, spec.partial),
        WindowMode::Time { duration_ms, origin_ms } => segment_time(comments, duration_ms, origin_ms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Comment, CommentId, Topic};
    use crate::scorer::SentimentLabel;
    use proptest::prelude::*;

    fn sc(ts: i64, tag: u64) -> ScoredComment {
        ScoredComment {
            comment: Comment {
                id: CommentId::Synthetic(tag),
                timestamp_ms: ts,
                text: "x".into(),
                label: None,
                topic: Topic::unlabeled(),
            },
            label: SentimentLabel::Neutral,
        }
    }

    fn tags(cs: &[ScoredComment]) -> Vec<u64> {
        cs.iter()
            .map(|c| match c.comment.id {
                CommentId::Synthetic(t) => t,
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn sorting_is_stable() {
        let sorted = sort_by_time(vec![sc(3, 0), sc(1, 1), sc(2, 2)]);
        assert_eq!(tags(&sorted), vec![1, 2, 0]);
        let ties = sort_by_time(vec![sc(5, 0), sc(5, 1), sc(1, 2), sc(5, 3)]);
        assert_eq!(tags(&ties), vec![2, 0, 1, 3]);
        let already = sort_by_time(vec![sc(1, 0), sc(2, 1)]);
        assert_eq!(tags(&already), vec![0, 1]);
    }

    #[test]
    fn count_windows_partial_policy() {
        let cs: Vec<_> = (0..250).map(|i| sc(i, i as u64)).collect();
        let drop = segment_count(&cs, 100, PartialPolicy::Drop).unwrap();
        assert_eq!(drop.iter().map(Window::len).collect::<Vec<_>>(), vec![100, 100]);
        let keep = segment_count(&cs, 100, PartialPolicy::Keep).unwrap();
        assert_eq!(keep.iter().map(Window::len).collect::<Vec<_>>(), vec![100, 100, 50]);
        assert!(keep[2].partial && !keep[1].partial);
        assert_eq!(
            keep[2].bounds,
            WindowBounds::Count {
                first_ordinal: 200,
                last_ordinal: 249
            }
        );
        assert!(segment_count(&cs[..99], 100, PartialPolicy::Drop).unwrap().is_empty());
        assert_eq!(segment_count(&cs, 0, PartialPolicy::Drop), Err(WindowError::ZeroSize));
    }

    #[test]
    fn time_windows_skip_empty_buckets() {
        let cs = vec![sc(10, 0), sc(2 * DAY_MS + 5, 1)];
        let ws = segment_time(&cs, DAY_MS, None).unwrap();
        assert_eq!(ws.len(), 2);
        assert!(!ws[0].gap_before);
        assert!(ws[1].gap_before);
        assert_eq!(ws[1].index, 1);
        assert_eq!(
            ws[1].bounds,
            WindowBounds::Time {
                start_ms: 2 * DAY_MS,
                end_ms: 3 * DAY_MS
            }
        );
    }

    #[test]
    fn time_windows_single_bucket_and_boundary() {
        let cs: Vec<_> = (0..5).map(|i| sc(1000 + i * 3_600_000, i as u64)).collect();
        assert_eq!(segment_time(&cs, DAY_MS, None).unwrap().len(), 1);

        let boundary = vec![sc(0, 0), sc(DAY_MS - 1, 1), sc(DAY_MS, 2)];
        let ws = segment_time(&boundary, DAY_MS, Some(0)).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(tags(ws[1].members), vec![2]);
        assert!(!ws[1].gap_before);
    }

    #[test]
    fn time_rejects_bad_input() {
        assert_eq!(segment_time(&[], 0, None), Err(WindowError::ZeroDuration));
        let unsorted = vec![sc(5, 0), sc(1, 1)];
        assert_eq!(segment_time(&unsorted, 10, None), Err(WindowError::NotSorted(1)));
    }

    #[test]
    fn origin_defaults_to_midnight() {
        assert_eq!(default_origin(DAY_MS + 5), DAY_MS);
        assert_eq!(default_origin(0), 0);
    }

    proptest! {
        #[test]
        fn count_windows_partition(len in 0usize..400, size in 1usize..60, keep in any::<bool>()) {
            let cs: Vec<_> = (0..len).map(|i| sc(i as i64, i as u64)).collect();
            let policy = if keep { PartialPolicy::Keep } else { PartialPolicy::Drop };
            let ws = segment_count(&cs, size, policy).unwrap();
            let retained: Vec<u64> = ws.iter().flat_map(|w| tags(w.members)).collect();
            let expected_len = if keep { len } else { len - len % size };
            prop_assert_eq!(retained, (0..expected_len as u64).collect::<Vec<_>>());
            for (i, w) in ws.iter().enumerate() {
                prop_assert_eq!(w.index, i);
                prop_assert!(!w.is_empty());
                if !keep { prop_assert_eq!(w.len(), size); }
            }
        }

        #[test]
        fn time_windows_partition_and_align(
            mut stamps in proptest::collection::vec(0i64..1_000_000, 0..200),
            duration in 1i64..50_000,
            origin in -100_000i64..100_000,
        ) {
            stamps.sort();
            let cs: Vec<_> = stamps.iter().enumerate().map(|(i, t)| sc(*t, i as u64)).collect();
            let ws = segment_time(&cs, duration, Some(origin)).unwrap();
            let retained: Vec<u64> = ws.iter().flat_map(|w| tags(w.members)).collect();
            prop_assert_eq!(retained, (0..cs.len() as u64).collect::<Vec<_>>());
            for (i, w) in ws.iter().enumerate() {
                prop_assert_eq!(w.index, i);
                let WindowBounds::Time { start_ms, end_ms } = w.bounds else { unreachable!() };
                prop_assert_eq!((start_ms - origin).rem_euclid(duration), 0);
                prop_assert_eq!(end_ms - start_ms, duration);
                for m in w.members {
                    prop_assert!(start_ms <= m.comment.timestamp_ms && m.comment.timestamp_ms < end_ms);
                }
            }
            let again = segment_time(&cs, duration, Some(origin)).unwrap();
            prop_assert_eq!(ws, again);
        }
    }
}
