//! Router alias sets: IP addresses known to belong to one physical router.
//!
//! Backed by a union-find so alias sets stay disjoint however many alias
//! files are merged, and so that re-adding a known pair is a no-op.

use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::RouterIp;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    parent: BTreeMap<RouterIp, RouterIp>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    fn find(&self, ip: RouterIp) -> RouterIp {
        let mut current = ip;
        while let Some(&p) = self.parent.get(&current) {
            if p == current {
                break;
            }
            current = p;
        }
        current
    }

    fn find_compress(&mut self, ip: RouterIp) -> RouterIp {
        let root = self.find(ip);
        let mut current = ip;
        while let Some(&p) = self.parent.get(&current) {
            if p == current {
                break;
            }
            self.parent.insert(current, root);
            current = p;
        }
        root
    }

    /// Record that two addresses belong to the same router. Idempotent.
    pub fn add_pair(&mut self, a: RouterIp, b: RouterIp) {
        self.parent.entry(a).or_insert(a);
        self.parent.entry(b).or_insert(b);
        let (ra, rb) = (self.find_compress(a), self.find_compress(b));
        if ra != rb {
            // deterministic representative: the numerically smallest member
            let (keep, merge) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(merge, keep);
        }
    }

    /// Canonical representative for an IP (itself when never aliased).
    pub fn canonical(&self, ip: RouterIp) -> RouterIp {
        self.find(ip)
    }

    /// All known members of `ip`'s alias set, including `ip` itself.
    pub fn members(&self, ip: RouterIp) -> Vec<RouterIp> {
        let root = self.find(ip);
        let mut out: Vec<RouterIp> = self
            .parent
            .keys()
            .copied()
            .filter(|&other| self.find(other) == root)
            .collect();
        if out.is_empty() {
            out.push(ip);
        }
        out
    }

    /// Every alias set with two or more members, sorted.
    pub fn sets(&self) -> Vec<Vec<RouterIp>> {
        let mut by_root: BTreeMap<RouterIp, Vec<RouterIp>> = BTreeMap::new();
        for &ip in self.parent.keys() {
            by_root.entry(self.find(ip)).or_default().push(ip);
        }
        by_root.into_values().filter(|s| s.len() > 1).collect()
    }
}

/// Alias file: one router per line, space-separated IPs.
pub fn load_aliases(path: &Path) -> Result<AliasTable> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_aliases(&text)
}

pub fn parse_aliases(text: &str) -> Result<AliasTable> {
    let mut table = AliasTable::new();
    merge_aliases(&mut table, text)?;
    Ok(table)
}

pub fn merge_aliases(table: &mut AliasTable, text: &str) -> Result<()> {
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut ips = trimmed.split_whitespace();
        let first: RouterIp = ips
            .next()
            .unwrap()
            .parse()
            .map_err(|_| Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            })?;
        for token in ips {
            let ip: RouterIp = token.parse().map_err(|_| Error::UnparseableLine {
                line_no: line_no + 1,
                text: line.to_string(),
            })?;
            table.add_pair(first, ip);
        }
    }
    Ok(())
}
