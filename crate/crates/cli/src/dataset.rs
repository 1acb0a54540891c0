//! JSONL dataset ingestion.

use std::collections::BTreeMap;

use creativity_cert::metrics::{MetricKind, ScoredRecord};
use creativity_cert::{Creation, Error, Info, Prompt, World};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub creator_id: usize,
    pub info: Vec<u32>,
    #[serde(default)]
    pub prompt: Option<Vec<u32>>,
    #[serde(default)]
    pub creation: Option<Vec<u32>>,
    #[serde(default)]
    pub evaluator_bit: Option<u8>,
    #[serde(default)]
    pub entropy: Option<f64>,
}

/// Parses one record per non-blank line. Errors carry the 1-based line number.
pub fn parse(text: &str) -> Result<Vec<(usize, DatasetRecord)>, Error> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord =
            serde_json::from_str(line).map_err(|e| Error::Validation(format!("line {}: {e}", i + 1)))?;
        out.push((i + 1, rec));
    }
    if out.is_empty() {
        return Err(Error::Domain("dataset has no records".into()));
    }
    Ok(out)
}

fn mode_error(line: usize, mode: MetricKind, what: &str) -> Error {
    Error::Validation(format!("line {line}: {mode:?} mode {what}"))
}

/// Field presence check for one record.
pub fn check_mode(line: usize, rec: &DatasetRecord, mode: MetricKind) -> Result<(), Error> {
    let prompted = matches!(mode, MetricKind::E2 | MetricKind::E3);
    match (prompted, rec.prompt.is_some()) {
        (true, false) => return Err(mode_error(line, mode, "requires \"prompt\"")),
        (false, true) => return Err(mode_error(line, mode, "does not take \"prompt\"")),
        _ => {}
    }
    if mode.is_weighted_nll() {
        if rec.creation.is_none() {
            return Err(mode_error(line, mode, "requires \"creation\""));
        }
        if rec.evaluator_bit.is_some() {
            return Err(mode_error(line, mode, "does not take \"evaluator_bit\""));
        }
    } else {
        match rec.evaluator_bit {
            None => return Err(mode_error(line, mode, "requires \"evaluator_bit\"")),
            Some(b) if b > 1 => return Err(Error::Validation(format!("line {line}: evaluator_bit must be 0 or 1"))),
            _ => {}
        }
        if rec.creation.is_some() {
            return Err(mode_error(line, mode, "does not take \"creation\""));
        }
    }
    Ok(())
}

/// Evaluator bits for E0/E2.
pub fn bits(records: &[(usize, DatasetRecord)], mode: MetricKind) -> Result<Vec<u8>, Error> {
    records
        .iter()
        .map(|(line, r)| {
            check_mode(*line, r, mode)?;
            Ok(r.evaluator_bit.expect("checked"))
        })
        .collect()
}

/// Builds scored records for E1/E3. With a world, prompts and info are
/// matched against it and entropies are computed exactly; a record entropy
/// that disagrees with the world is rejected. Without one, every record
/// must carry its own entropy.
pub fn scored_records(
    records: &[(usize, DatasetRecord)],
    mode: MetricKind,
    world: Option<&World>,
    vocab: usize,
) -> Result<Vec<ScoredRecord<f64>>, Error> {
    let mut prompt_ids: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for (line, r) in records {
        let line = *line;
        check_mode(line, r, mode)?;
        let at = |e: Error| Error::Validation(format!("line {line}: {e}"));
        let tokens = r.creation.clone().expect("checked");
        let prompt_tokens = r.prompt.clone().unwrap_or_default();
        if let Some(&bad) = prompt_tokens.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::Validation(format!("line {line}: prompt token {bad} outside vocab {vocab}")));
        }
        let record = match world {
            Some(w) => {
                let creation = Creation::new(tokens, vocab, w.seq_len()).map_err(at)?;
                let c = w.creator(r.creator_id).map_err(at)?;
                let info = w.information_of(c).map_err(at)?;
                if info.raw() != r.info {
                    return Err(Error::Validation(format!(
                        "line {line}: info {:?} does not match creator {} in the world",
                        r.info, r.creator_id
                    )));
                }
                let prompt = if mode == MetricKind::E1 {
                    if w.num_prompts() != 1 {
                        return Err(Error::Validation("E1 needs a single-prompt world".into()));
                    }
                    w.prompt(0).map_err(at)?
                } else {
                    w.all_prompts()
                        .into_iter()
                        .find(|u| u.tokens == prompt_tokens)
                        .ok_or_else(|| Error::Validation(format!("line {line}: prompt {prompt_tokens:?} not in the world")))?
                };
                let entropy = w.sequence_entropy(c, &prompt).map_err(at)?;
                if let Some(h) = r.entropy {
                    if (h - entropy).abs() > 1e-9 {
                        return Err(Error::Validation(format!(
                            "line {line}: entropy {h} disagrees with the world ({entropy})"
                        )));
                    }
                }
                ScoredRecord {
                    creation,
                    prompt,
                    info,
                    entropy,
                }
            }
            None => {
                let len = tokens.len();
                let creation = Creation::new(tokens, vocab, len).map_err(at)?;
                let entropy = r.entropy.ok_or_else(|| {
                    Error::Validation(format!("line {line}: \"entropy\" is required in {mode:?} mode without a world"))
                })?;
                let next = prompt_ids.len();
                let id = *prompt_ids.entry(prompt_tokens.clone()).or_insert(next);
                ScoredRecord {
                    creation,
                    prompt: Prompt {
                        id,
                        tokens: prompt_tokens,
                    },
                    info: Info::new(r.info.iter().copied()),
                    entropy,
                }
            }
        };
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_numbers_in_parse_errors() {
        let text = "{\"creator_id\":0,\"info\":[0],\"evaluator_bit\":1}\n\n{\"creator_id\":1,\"info\":[1],\"evaluator_bit\":}\n";
        let err = parse(text).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn empty_is_domain_error() {
        assert!(matches!(parse("\n  \n"), Err(Error::Domain(_))));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(parse("{\"creator_id\":0,\"info\":[],\"evaluator_bit\":1,\"extra\":2}").is_err());
    }

    #[test]
    fn mode_presence() {
        let rec: DatasetRecord = serde_json::from_str("{\"creator_id\":0,\"info\":[0],\"evaluator_bit\":1}").unwrap();
        assert!(check_mode(1, &rec, MetricKind::E0).is_ok());
        assert!(check_mode(1, &rec, MetricKind::E2).is_err());
        assert!(check_mode(1, &rec, MetricKind::E1).is_err());
        let rec: DatasetRecord =
            serde_json::from_str("{\"creator_id\":0,\"info\":[0],\"evaluator_bit\":2}").unwrap();
        assert!(check_mode(1, &rec, MetricKind::E0).is_err());
    }

    #[test]
    fn entropy_required_without_world() {
        let recs = parse("{\"creator_id\":0,\"info\":[0],\"creation\":[1]}").unwrap();
        let err = scored_records(&recs, MetricKind::E1, None, 2).unwrap_err().to_string();
        assert!(err.contains("entropy"), "{err}");
    }
}
