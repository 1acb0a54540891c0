//! Minimal external scorer for exercising the wire protocol.
//!
//! `scorer-stub [MODE]` where MODE is one of
//! uniform (default), skewed, bad-sum, wrong-id, wrong-len, garbage, silent, exit.

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "uniform".into());
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        let Ok(req) = serde_json::from_str::<Value>(&line) else {
            break;
        };
        let id = req["id"].as_u64().unwrap_or(0);
        let vocab = req["vocab"].as_u64().unwrap_or(1) as usize;
        let prefix_len = req["prefix"].as_array().map_or(0, |p| p.len());
        let uniform = vec![-(vocab as f64).ln(); vocab];
        let reply = match mode.as_str() {
            "uniform" => json!({ "id": id, "logprobs": uniform }),
            "skewed" => {
                // mass 1/2 on token (prefix length mod V), rest spread evenly
                let hot = prefix_len % vocab;
                let lp: Vec<Option<f64>> = (0..vocab)
                    .map(|v| {
                        if vocab == 1 {
                            Some(0.0)
                        } else if v == hot {
                            Some(0.5f64.ln())
                        } else {
                            Some((0.5 / (vocab - 1) as f64).ln())
                        }
                    })
                    .collect();
                json!({ "id": id, "logprobs": lp })
            }
            "bad-sum" => json!({ "id": id, "logprobs": vec![0.0; vocab] }),
            "wrong-id" => json!({ "id": id + 7, "logprobs": uniform }),
            "wrong-len" => json!({ "id": id, "logprobs": vec![-(vocab as f64 + 1.0).ln(); vocab + 1] }),
            "garbage" => {
                let _ = writeln!(out, "not json");
                let _ = out.flush();
                continue;
            }
            "silent" => continue,
            "exit" => return,
            other => {
                eprintln!("unknown mode {other}");
                std::process::exit(2);
            }
        };
        if writeln!(out, "{reply}").and_then(|_| out.flush()).is_err() {
            break;
        }
    }
}
