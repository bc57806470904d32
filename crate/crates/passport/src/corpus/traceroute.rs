//! Parser for standard multi-line traceroute output.

use serde::{Deserialize, Serialize};

use crate::corpus::{RouterIp, SourceEndpoint};
use crate::error::{Error, Result};

/// One responsive hop: the address that answered and the minimum RTT over
/// the probes listed for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub ip: RouterIp,
    pub min_rtt_ms: f64,
    pub hop_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathDirection {
    Forward,
    Reverse,
}

/// A parsed traceroute. Unresponsive hops are retained as `gaps` so that
/// downstream feasibility reasoning can bound absent routers by their
/// neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceroutePath {
    pub source: Option<SourceEndpoint>,
    pub destination: Option<RouterIp>,
    pub hops: Vec<Hop>,
    pub gaps: Vec<usize>,
    pub direction: PathDirection,
    pub timestamp: Option<String>,
}

impl TraceroutePath {
    pub fn with_source(mut self, source: SourceEndpoint) -> Self {
        self.source = Some(source);
        self
    }

    /// Hops with the endpoints excluded, for label extraction.
    pub fn interior_hops(&self) -> &[Hop] {
        match (self.destination, self.hops.last()) {
            (Some(dst), Some(last)) if last.ip == dst => &self.hops[..self.hops.len() - 1],
            _ => &self.hops,
        }
    }
}

/// Parse raw traceroute output: a header line followed by hop lines of the
/// form `N  host (a.b.c.d)  1.2 ms  1.3 ms  1.1 ms`, with `*` for lost
/// probes. The per-hop RTT is the minimum over the listed probe RTTs;
/// fully-starred hops are recorded as gaps, not hops.
pub fn parse_traceroute(text: &str) -> Result<TraceroutePath> {
    let mut destination = None;
    let mut hops: Vec<Hop> = Vec::new();
    let mut gaps: Vec<usize> = Vec::new();
    let mut last_index: Option<usize> = None;

    for (line_no, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("traceroute to") || line.starts_with("traceroute6 to") {
            destination = header_destination(line);
            continue;
        }

        let unparseable = || Error::UnparseableLine {
            line_no: line_no + 1,
            text: raw_line.to_string(),
        };

        let mut tokens = line.split_whitespace().peekable();
        let index: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(unparseable)?;
        if last_index.is_some_and(|prev| index <= prev) {
            return Err(unparseable());
        }
        last_index = Some(index);

        let mut ip: Option<RouterIp> = None;
        let mut rtts: Vec<f64> = Vec::new();
        let mut starred = 0usize;

        while let Some(token) = tokens.next() {
            if token == "*" {
                starred += 1;
            } else if let Some(inner) = token.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
                let parsed: RouterIp = inner.parse().map_err(|_| unparseable())?;
                ip.get_or_insert(parsed);
            } else if let Ok(parsed) = token.parse::<RouterIp>() {
                ip.get_or_insert(parsed);
            } else if let Ok(value) = token.parse::<f64>() {
                match tokens.peek() {
                    Some(&"ms") => {
                        tokens.next();
                        if value < 0.0 {
                            return Err(unparseable());
                        }
                        rtts.push(value);
                    }
                    _ => return Err(unparseable()),
                }
            } else if let Some(value) = token
                .strip_suffix("ms")
                .and_then(|t| t.parse::<f64>().ok())
            {
                if value < 0.0 {
                    return Err(unparseable());
                }
                rtts.push(value);
            } else if token.starts_with('!') || token.contains('.') || token.contains(':') {
                // annotation (!H, !N, ...) or hostname; ignored
            } else if token.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '_') {
                // bare hostname
            } else {
                return Err(unparseable());
            }
        }

        match ip {
            Some(ip) if !rtts.is_empty() => {
                let min_rtt = rtts.iter().copied().fold(f64::INFINITY, f64::min);
                hops.push(Hop {
                    ip,
                    min_rtt_ms: min_rtt,
                    hop_index: index,
                });
            }
            Some(_) => return Err(unparseable()),
            None if starred > 0 => gaps.push(index),
            None => return Err(unparseable()),
        }
    }

    if hops.is_empty() {
        return Err(Error::EmptyPath);
    }

    Ok(TraceroutePath {
        source: None,
        destination,
        hops,
        gaps,
        direction: PathDirection::Forward,
        timestamp: None,
    })
}

/// Render a path back into standard traceroute text. Each responsive hop
/// prints three probe RTTs whose minimum is the hop's `min_rtt_ms`, so
/// parsing the output recovers the same (ips, min_rtts, gaps).
pub fn format_traceroute(path: &TraceroutePath) -> String {
    let mut out = String::new();
    if let Some(dst) = path.destination {
        out.push_str(&format!(
            "traceroute to {dst} ({dst}), 30 hops max, 60 byte packets\n"
        ));
    }
    let mut hop_iter = path.hops.iter().peekable();
    let mut gap_iter = path.gaps.iter().peekable();
    loop {
        match (hop_iter.peek(), gap_iter.peek()) {
            (Some(hop), Some(&&gap)) if gap < hop.hop_index => {
                out.push_str(&format!("{gap:2}  * * *\n"));
                gap_iter.next();
            }
            (Some(hop), _) => {
                let r = hop.min_rtt_ms;
                // the first probe carries the exact minimum; the others
                // only need to stay above it after a 3-decimal round
                out.push_str(&format!(
                    "{:2}  {} ({})  {} ms  {:.3} ms  {:.3} ms\n",
                    hop.hop_index,
                    hop.ip,
                    hop.ip,
                    r,
                    r + 0.2,
                    r + 0.4
                ));
                hop_iter.next();
            }
            (None, Some(&&gap)) => {
                out.push_str(&format!("{gap:2}  * * *\n"));
                gap_iter.next();
            }
            (None, None) => break,
        }
    }
    out
}

fn header_destination(line: &str) -> Option<RouterIp> {
    // `traceroute to host (a.b.c.d), 30 hops max, ...`
    if let (Some(open), Some(close)) = (line.find('('), line.find(')')) {
        if open < close {
            if let Ok(ip) = line[open + 1..close].parse() {
                return Some(ip);
            }
        }
    }
    line.split_whitespace()
        .nth(2)
        .and_then(|t| t.trim_end_matches(',').parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_HOPS: &str = "\
traceroute to example.org (93.184.216.34), 30 hops max, 60 byte packets
 1  gw.local (62.1.0.1)  1.20 ms  1.10 ms  1.32 ms
 2  62.1.5.9 (62.1.5.9)  10.1 ms  9.8 ms  10.0 ms
 3  93.184.216.34 (93.184.216.34)  18.0 ms  17.7 ms  17.9 ms
";

    #[test]
    fn per_hop_min_rtt() {
        let path = parse_traceroute(THREE_HOPS).unwrap();
        assert_eq!(path.hops.len(), 3);
        let hop2 = &path.hops[1];
        assert_eq!(hop2.hop_index, 2);
        assert_eq!(hop2.min_rtt_ms, 9.8);
        assert_eq!(path.destination, Some("93.184.216.34".parse().unwrap()));
    }

    #[test]
    fn starred_hop_becomes_gap() {
        let text = "\
traceroute to example.org (93.184.216.34), 30 hops max
 4  62.1.0.1 (62.1.0.1)  4.0 ms  4.1 ms  4.2 ms
 5  * * *
 6  62.1.0.9 (62.1.0.9)  9.0 ms  9.1 ms  9.2 ms
";
        let path = parse_traceroute(text).unwrap();
        assert_eq!(path.hops.len(), 2);
        assert_eq!(path.gaps, vec![5]);
    }

    #[test]
    fn eight_hop_capture_with_two_starred_hops() {
        // Hand-written fixture: 8 hop lines, 2 fully starred.
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/fixtures/trace_8hop.txt"
        ))
        .unwrap();
        let path = parse_traceroute(&text).unwrap();
        assert_eq!(path.hops.len(), 6);
        assert_eq!(path.gaps.len(), 2);
        assert_eq!(path.gaps, vec![3, 6]);
        let indices: Vec<usize> = path.hops.iter().map(|h| h.hop_index).collect();
        assert_eq!(indices, vec![1, 2, 4, 5, 7, 8]);
    }

    #[test]
    fn partially_starred_hop_still_counts() {
        let text = " 1  r1.net (9.9.9.9)  20.5 ms * 21.0 ms\n";
        let path = parse_traceroute(text).unwrap();
        assert_eq!(path.hops[0].min_rtt_ms, 20.5);
    }

    #[test]
    fn malformed_hop_line_is_rejected() {
        let text = " 1  9.9.9.9 (9.9.9.9)  what ms\n";
        match parse_traceroute(text) {
            Err(Error::UnparseableLine { line_no: 1, .. }) => {}
            other => panic!("expected UnparseableLine, got {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_hop_index_is_rejected() {
        let text = " 2  9.9.9.9 (9.9.9.9)  1.0 ms\n 2  9.9.9.8 (9.9.9.8)  2.0 ms\n";
        assert!(matches!(
            parse_traceroute(text),
            Err(Error::UnparseableLine { .. })
        ));
    }

    #[test]
    fn all_starred_is_empty_path() {
        let text = " 1  * * *\n 2  * * *\n";
        assert!(matches!(parse_traceroute(text), Err(Error::EmptyPath)));
    }

    #[test]
    fn interior_hops_drop_destination() {
        let path = parse_traceroute(THREE_HOPS).unwrap();
        assert_eq!(path.interior_hops().len(), 2);
    }

    #[test]
    fn format_then_parse_recovers_path_with_gaps() {
        let original = parse_traceroute(
            "traceroute to x (80.20.9.17), 30 hops max\n 1  a (62.40.1.1)  0.81 ms\n 2  * * *\n 4  b (80.20.9.17)  17.1 ms  16.8 ms\n",
        )
        .unwrap();
        let rendered = format_traceroute(&original);
        let reparsed = parse_traceroute(&rendered).unwrap();
        assert_eq!(reparsed.hops, original.hops);
        assert_eq!(reparsed.gaps, original.gaps);
    }
}
