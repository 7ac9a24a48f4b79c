//! Episodes and episode streams.
//!
//! An [`Episode`] carries one representative feature vector per deployment
//! episode. Streams can be read from two line-oriented formats:
//!
//! ```text
//! JSONL: {"id": 0, "features": [0.1, 0.2], "shape": [1, 2]}
//! CSV:   id,f0,f1
//!        0,0.1,0.2
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Vec<usize>>,
}

impl Episode {
    pub fn new(id: u64, features: Vec<f64>) -> Result<Self> {
        Self::with_shape(id, features, None)
    }

    pub fn with_shape(id: u64, features: Vec<f64>, shape: Option<Vec<usize>>) -> Result<Self> {
        let episode = Self {
            id,
            features,
            shape,
        };
        episode.validate(0)?;
        Ok(episode)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    fn validate(&self, row: usize) -> Result<()> {
        if let Some(column) = self.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, column });
        }
        if let Some(shape) = &self.shape {
            let product: usize = shape.iter().product();
            if product != self.features.len() {
                return Err(Error::Parse {
                    row,
                    message: format!(
                        "shape {:?} holds {} values but {} features were given",
                        shape,
                        product,
                        self.features.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamLabel {
    /// Data observed before deployment.
    Train,
    /// Data observed during deployment.
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamFormat {
    Jsonl,
    Csv,
}

impl StreamFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => StreamFormat::Csv,
            _ => StreamFormat::Jsonl,
        }
    }
}

impl FromStr for StreamFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(StreamFormat::Jsonl),
            "csv" => Ok(StreamFormat::Csv),
            other => Err(Error::Config(format!("unknown stream format {other:?}"))),
        }
    }
}

/// An ordered sequence of episodes with a train/test label.
///
/// Ids are checked to be strictly increasing as episodes are yielded, and
/// every episode must share the dimension of the first.
pub struct EpisodeStream {
    label: StreamLabel,
    source: Box<dyn Iterator<Item = Result<Episode>> + Send>,
    last_id: Option<u64>,
    dim: Option<usize>,
    row: usize,
}

impl std::fmt::Debug for EpisodeStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EpisodeStream")
            .field("label", &self.label)
            .field("last_id", &self.last_id)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl EpisodeStream {
    pub fn from_episodes(label: StreamLabel, episodes: Vec<Episode>) -> Self {
        Self::from_iter_results(label, episodes.into_iter().map(Ok))
    }

    pub fn from_iter_results<I>(label: StreamLabel, iter: I) -> Self
    where
        I: Iterator<Item = Result<Episode>> + Send + 'static,
    {
        Self {
            label,
            source: Box::new(iter),
            last_id: None,
            dim: None,
            row: 0,
        }
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    pub fn collect_episodes(self) -> Result<Vec<Episode>> {
        self.collect()
    }
}

impl Iterator for EpisodeStream {
    type Item = Result<Episode>;

    fn next(&mut self) -> Option<Self::Item> {
        let episode = match self.source.next()? {
            Ok(ep) => ep,
            Err(e) => return Some(Err(e)),
        };
        self.row += 1;
        if let Some(previous) = self.last_id {
            if episode.id <= previous {
                return Some(Err(Error::OutOfOrder {
                    previous,
                    next: episode.id,
                }));
            }
        }
        match self.dim {
            Some(expected) if expected != episode.dim() => {
                return Some(Err(Error::RowDimension {
                    row: self.row,
                    expected,
                    found: episode.dim(),
                }))
            }
            None => self.dim = Some(episode.dim()),
            _ => {}
        }
        self.last_id = Some(episode.id);
        Some(Ok(episode))
    }
}

/// Reads and validates an episode file. Rows are numbered from 1, excluding
/// the CSV header.
pub fn load_stream(path: &Path, format: StreamFormat, label: StreamLabel) -> Result<EpisodeStream> {
    let episodes = match format {
        StreamFormat::Jsonl => read_jsonl(path)?,
        StreamFormat::Csv => read_csv(path)?,
    };
    check_rows(&episodes)?;
    Ok(EpisodeStream::from_episodes(label, episodes))
}

fn check_rows(episodes: &[Episode]) -> Result<()> {
    let Some(first) = episodes.first() else {
        return Ok(());
    };
    let expected = first.dim();
    for (i, pair) in episodes.windows(2).enumerate() {
        let row = i + 2;
        if pair[1].dim() != expected {
            return Err(Error::RowDimension {
                row,
                expected,
                found: pair[1].dim(),
            });
        }
        if pair[1].id <= pair[0].id {
            return Err(Error::OutOfOrder {
                previous: pair[0].id,
                next: pair[1].id,
            });
        }
    }
    Ok(())
}

fn read_jsonl(path: &Path) -> Result<Vec<Episode>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut episodes = Vec::new();
    let mut row = 0;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let episode: Episode = serde_json::from_str(&line).map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        episode.validate(row)?;
        episodes.push(episode);
    }
    Ok(episodes)
}

fn read_csv(path: &Path) -> Result<Vec<Episode>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut episodes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let mut fields = record.iter();
        let id = fields
            .next()
            .ok_or_else(|| Error::Parse {
                row,
                message: "missing id".into(),
            })?
            .parse::<u64>()
            .map_err(|e| Error::Parse {
                row,
                message: format!("bad id: {e}"),
            })?;
        let features = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    message: format!("bad feature {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let episode = Episode {
            id,
            features,
            shape: None,
        };
        episode.validate(row)?;
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Writes episodes in the given format. CSV output drops shape metadata.
pub fn write_episodes(path: &Path, format: StreamFormat, episodes: &[Episode]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    match format {
        StreamFormat::Jsonl => {
            for ep in episodes {
                serde_json::to_writer(&mut out, ep)?;
                out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
            }
        }
        StreamFormat::Csv => {
            let dim = episodes.first().map_or(0, Episode::dim);
            let mut header = String::from("id");
            for i in 0..dim {
                header.push_str(&format!(",f{i}"));
            }
            writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
            for ep in episodes {
                let mut line = ep.id.to_string();
                for v in &ep.features {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
                writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    #[test]
    fn three_valid_jsonl_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "a.jsonl",
            "{\"id\":0,\"features\":[1,2,3,4]}\n{\"id\":1,\"features\":[1,2,3,4],\"shape\":[2,2]}\n{\"id\":5,\"features\":[0,0,0,0.5]}\n",
        );
        let eps = load_stream(&path, StreamFormat::Jsonl, StreamLabel::Train)
            .unwrap()
            .collect_episodes()
            .unwrap();
        assert_eq!(eps.len(), 3);
        assert!(eps.iter().all(|e| e.dim() == 4));
        assert_eq!(eps[1].shape, Some(vec![2, 2]));
    }

    #[test]
    fn csv_dimension_mismatch_names_row_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "a.csv", "id,f0,f1,f2,f3\n0,1,2,3,4\n1,1,2,3,4,5\n2,1,2,3,4\n");
        match load_stream(&path, StreamFormat::Csv, StreamLabel::Test) {
            Err(Error::RowDimension { row, expected, found }) => {
                assert_eq!((row, expected, found), (2, 4, 5));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_dimension_mismatch_names_row_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "a.jsonl",
            "{\"id\":0,\"features\":[1,2,3,4]}\n{\"id\":1,\"features\":[1,2,3,4,5]}\n",
        );
        let err = load_stream(&path, StreamFormat::Jsonl, StreamLabel::Test).unwrap_err();
        assert!(matches!(err, Error::RowDimension { row: 2, .. }), "{err}");
    }

    #[test]
    fn empty_files_give_empty_streams() {
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("e.jsonl", StreamFormat::Jsonl), ("e.csv", StreamFormat::Csv)] {
            let path = write(&dir, name, "");
            let eps = load_stream(&path, format, StreamLabel::Train)
                .unwrap()
                .collect_episodes()
                .unwrap();
            assert!(eps.is_empty());
        }
    }

    #[test]
    fn malformed_and_non_finite_rows_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "bad.jsonl", "{\"id\":0,\"features\":[1]}\n{\"id\":1,\"feat\n");
        assert!(matches!(
            load_stream(&path, StreamFormat::Jsonl, StreamLabel::Train),
            Err(Error::Parse { row: 2, .. })
        ));
        let path = write(&dir, "nan.csv", "id,f0,f1\n0,1,NaN\n");
        assert!(matches!(
            load_stream(&path, StreamFormat::Csv, StreamLabel::Train),
            Err(Error::NonFinite { row: 1, column: 1 })
        ));
    }

    #[test]
    fn shape_must_match_feature_count() {
        assert!(Episode::with_shape(0, vec![0.0; 6], Some(vec![2, 3])).is_ok());
        assert!(Episode::with_shape(0, vec![0.0; 5], Some(vec![2, 3])).is_err());
    }

    #[test]
    fn stream_rejects_decreasing_ids() {
        let eps = vec![
            Episode::new(3, vec![0.0]).unwrap(),
            Episode::new(2, vec![0.0]).unwrap(),
        ];
        let result: Result<Vec<_>> = EpisodeStream::from_episodes(StreamLabel::Test, eps).collect();
        assert!(matches!(result, Err(Error::OutOfOrder { previous: 3, next: 2 })));
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let eps: Vec<Episode> = (0..4)
            .map(|i| Episode::new(i, vec![i as f64 * 0.1, -1.5e-7, 3.0]).unwrap())
            .collect();
        for (name, format) in [("r.jsonl", StreamFormat::Jsonl), ("r.csv", StreamFormat::Csv)] {
            let path = dir.path().join(name);
            write_episodes(&path, format, &eps).unwrap();
            let back = load_stream(&path, format, StreamLabel::Train)
                .unwrap()
                .collect_episodes()
                .unwrap();
            assert_eq!(back, eps);
        }
    }
}
