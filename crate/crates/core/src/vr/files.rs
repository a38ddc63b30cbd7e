use std::path::Path;

use super::{BiasedSource, ImportanceMap, WeightWindowMap, Window};
use crate::grid::CellGroupData;
use crate::textio::{fmt_f64, fmt_f64_list, parse_f64_list, parse_num, Document};
use crate::{Error, Result};

pub fn importance_document(map: &ImportanceMap) -> Document {
    let mut doc = Document::new("importance");
    doc.set("cells", map.imp.n_cells)
        .set("groups", map.imp.n_groups)
        .set("r", fmt_f64(map.r));
    for (k, v) in &map.provenance {
        doc.set(k, v);
    }
    for c in 0..map.imp.n_cells {
        doc.push(format!("{c} {}", fmt_f64_list(map.imp.cell(c))));
    }
    doc
}

pub fn write_importance(map: &ImportanceMap, path: &Path) -> Result<String> {
    importance_document(map).write_to(path)
}

pub fn read_importance(path: &Path) -> Result<ImportanceMap> {
    let doc = Document::read_from(path, "importance")?;
    let n_cells: usize = doc.get_num("cells")?;
    let n_groups: usize = doc.get_num("groups")?;
    let mut values = Vec::with_capacity(n_cells * n_groups);
    for rec in &doc.records {
        let (_, rest) = rec.split_once(' ').unwrap_or((rec, ""));
        values.extend(parse_f64_list(rest, "importance")?);
    }
    let provenance = doc
        .header
        .iter()
        .filter(|(k, _)| !matches!(k.as_str(), "cells" | "groups" | "r"))
        .cloned()
        .collect();
    Ok(ImportanceMap {
        imp: CellGroupData::from_values(n_cells, n_groups, values)?,
        r: doc.get_num("r")?,
        provenance,
    })
}

pub fn weight_window_document(ww: &WeightWindowMap, geometry_hash: &str) -> Document {
    let mut doc = Document::new("weight_windows");
    doc.set("geometry_hash", geometry_hash)
        .set("cells", ww.n_cells)
        .set("groups", ww.n_groups)
        .set("ratio", fmt_f64(ww.ratio))
        .set(
            "group_map",
            ww.group_map.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(" "),
        );
    for c in 0..ww.n_cells {
        let mut rec = c.to_string();
        for g in 0..ww.n_groups {
            match ww.windows[c * ww.n_groups + g] {
                Some(w) => rec.push_str(&format!(" {}", fmt_f64_list(&[w.lo, w.center, w.hi]))),
                None => rec.push_str(" - - -"),
            }
        }
        doc.push(rec);
    }
    doc
}

pub fn write_weight_windows(ww: &WeightWindowMap, geometry_hash: &str, path: &Path) -> Result<String> {
    weight_window_document(ww, geometry_hash).write_to(path)
}

/// Returns the windows and the geometry hash they were built on.
pub fn read_weight_windows(path: &Path) -> Result<(WeightWindowMap, String)> {
    let doc = Document::read_from(path, "weight_windows")?;
    let n_cells: usize = doc.get_num("cells")?;
    let n_groups: usize = doc.get_num("groups")?;
    let group_map = doc
        .get("group_map")?
        .split_whitespace()
        .map(|t| parse_num(t, "weight_windows"))
        .collect::<Result<Vec<usize>>>()?;
    if doc.records.len() != n_cells {
        return Err(Error::parse("weight_windows", "record count does not match cell count"));
    }
    let mut windows = Vec::with_capacity(n_cells * n_groups);
    for rec in &doc.records {
        let toks: Vec<&str> = rec.split_whitespace().skip(1).collect();
        if toks.len() != 3 * n_groups {
            return Err(Error::parse("weight_windows", "bad record length"));
        }
        for t in toks.chunks(3) {
            if t[0] == "-" {
                windows.push(None);
            } else {
                windows.push(Some(Window {
                    lo: parse_num(t[0], "weight_windows")?,
                    center: parse_num(t[1], "weight_windows")?,
                    hi: parse_num(t[2], "weight_windows")?,
                }));
            }
        }
    }
    let ww = WeightWindowMap {
        n_cells,
        n_groups,
        ratio: doc.get_num("ratio")?,
        windows,
        group_map: (0..n_groups).collect(),
    }
    .with_group_map(group_map)?;
    Ok((ww, doc.get("geometry_hash")?.to_string()))
}

pub fn biased_source_document(src: &BiasedSource, geometry_hash: &str) -> Document {
    let mut doc = Document::new("biased_source");
    doc.set("geometry_hash", geometry_hash)
        .set("cells", src.n_cells)
        .set("groups", src.n_groups)
        .set("entries", src.entries.len());
    for (i, (c, g)) in src.entries.iter().enumerate() {
        doc.push(format!(
            "{c} {g} {}",
            fmt_f64_list(&[src.probability[i], src.cdf[i], src.born_weight[i]])
        ));
    }
    doc
}

pub fn write_biased_source(src: &BiasedSource, geometry_hash: &str, path: &Path) -> Result<String> {
    biased_source_document(src, geometry_hash).write_to(path)
}

pub fn read_biased_source(path: &Path) -> Result<(BiasedSource, String)> {
    let doc = Document::read_from(path, "biased_source")?;
    let mut src = BiasedSource {
        n_cells: doc.get_num("cells")?,
        n_groups: doc.get_num("groups")?,
        entries: Vec::new(),
        probability: Vec::new(),
        cdf: Vec::new(),
        born_weight: Vec::new(),
    };
    for rec in &doc.records {
        let t: Vec<&str> = rec.split_whitespace().collect();
        if t.len() != 5 {
            return Err(Error::parse("biased_source", "bad record length"));
        }
        src.entries.push((parse_num(t[0], "biased_source")?, parse_num(t[1], "biased_source")?));
        src.probability.push(parse_num(t[2], "biased_source")?);
        src.cdf.push(parse_num(t[3], "biased_source")?);
        src.born_weight.push(parse_num(t[4], "biased_source")?);
    }
    Ok((src, doc.get("geometry_hash")?.to_string()))
}
