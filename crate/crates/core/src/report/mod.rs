//! Figure emitters. Each figure is an SVG view over a CSV that holds
//! exactly the plotted numbers.

pub mod svg;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::audit::{AuditOutput, BoxStats, FeatureSensitivitySummary, SensitivityResult};
use crate::config::{TOOLKIT, VERSION};
use crate::dataset::DEMOGRAPHIC_COLUMNS;
use crate::spls::{CimLayout, Merge};
use svg::{diverging, sequential, Anchor, Svg};

pub const EMPTY_HEATMAP_TEXT: &str = "no significant associations";

/// Provenance marker written into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stamp {
    pub toolkit: String,
    pub version: String,
    pub config_hash: String,
}

impl Stamp {
    pub fn new(config_hash: &str) -> Self {
        Self { toolkit: TOOLKIT.into(), version: VERSION.into(), config_hash: config_hash.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {} config={}", self.toolkit, self.version, self.config_hash)
    }

    /// CSV preamble: one `#` comment line.
    pub fn csv_preamble(&self) -> String {
        format!("# {}\n", self.line())
    }

    /// `{"meta": stamp, <key>: payload}` as pretty JSON.
    pub fn wrap_json<T: Serialize>(&self, key: &str, payload: &T) -> String {
        let mut map = serde_json::Map::new();
        map.insert("meta".into(), serde_json::to_value(self).expect("stamp serializes"));
        map.insert(key.into(), serde_json::to_value(payload).expect("payload serializes"));
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("value serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone)]
pub struct Figure {
    pub stem: &'static str,
    pub csv: String,
    pub svg: String,
}

/// Features grouped by their number of significant demographics.
pub fn ranking_groups(summaries: &[FeatureSensitivitySummary]) -> Vec<(usize, Vec<&FeatureSensitivitySummary>)> {
    let mut groups: BTreeMap<usize, Vec<&FeatureSensitivitySummary>> = BTreeMap::new();
    for s in summaries {
        groups.entry(s.n_significant).or_default().push(s);
    }
    groups.into_iter().rev().collect()
}

pub fn figure1(summaries: &[FeatureSensitivitySummary], stamp: &Stamp) -> Figure {
    let groups = ranking_groups(summaries);
    let mut csv = stamp.csv_preamble();
    csv.push_str("group,group_size,position,feature,n_significant,eta2_sum\n");
    let mut pos = 0;
    for (count, members) in &groups {
        for s in members {
            csv.push_str(&format!("{count},{},{pos},{},{},{}\n", members.len(), s.feature_name, s.n_significant, s.eta2_sum));
            pos += 1;
        }
    }

    let bar = 8.0;
    let gap = 6.0;
    let (left, top, plot_h) = (50.0, 40.0, 220.0);
    let n_groups = groups.len().max(1) as f64;
    let width = left + 20.0 + summaries.len() as f64 * bar + n_groups * gap;
    let height = top + plot_h + 110.0;
    let max_count = groups.first().map(|g| g.0).unwrap_or(0).max(1) as f64;
    let mut doc = Svg::new(width, height);
    doc.text(left, 20.0, "Features ranked by number of significant demographic associations", 13.0, Anchor::Start);
    let base = top + plot_h;
    for k in 0..=max_count as usize {
        let y = base - k as f64 / max_count * plot_h;
        doc.line(left - 4.0, y, width - 10.0, y, "#dddddd", 0.5);
        doc.text(left - 6.0, y + 3.0, &k.to_string(), 9.0, Anchor::End);
    }
    let mut x = left;
    for (gi, (count, members)) in groups.iter().enumerate() {
        let shade = if gi % 2 == 0 { "#f4f4f4" } else { "#e8e8e8" };
        let gw = members.len() as f64 * bar;
        doc.rect(x, top, gw, plot_h, shade);
        doc.text(x + gw / 2.0, top - 4.0, &format!("{count} ({})", members.len()), 9.0, Anchor::Middle);
        for (i, s) in members.iter().enumerate() {
            let bx = x + i as f64 * bar;
            let h = s.n_significant as f64 / max_count * plot_h;
            doc.rect(bx + 1.0, base - h, bar - 2.0, h, "#4575b4");
            doc.text_rotated(bx + bar / 2.0 + 3.0, base + 6.0, &s.feature_name, 7.0, Anchor::End, -90.0);
        }
        x += gw + gap;
    }
    doc.line(left, base, x, base, "#000000", 1.0);
    Figure { stem: "fig1_ranking", csv, svg: doc.finish(&stamp.line()) }
}

/// Deterministic jitter in [-0.5, 0.5) from the golden-ratio sequence.
pub fn jitter(i: usize) -> f64 {
    ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5
}

pub fn figure2(results: &[SensitivityResult], distributions: &[BoxStats], stamp: &Stamp) -> Figure {
    let mut csv = stamp.csv_preamble();
    csv.push_str("position,demographic,feature,eta2_partial,jitter,significant,q1,median,q3,whisker_low,whisker_high\n");
    let points: Vec<Vec<&SensitivityResult>> = distributions
        .iter()
        .map(|b| results.iter().filter(|r| r.demographic_name == b.demographic).collect())
        .collect();
    for (pos, (b, pts)) in distributions.iter().zip(&points).enumerate() {
        for (i, r) in pts.iter().enumerate() {
            csv.push_str(&format!(
                "{pos},{},{},{},{},{},{},{},{},{},{}\n",
                b.demographic,
                r.feature_name,
                r.eta2_partial,
                jitter(i),
                r.significant,
                b.q1,
                b.median,
                b.q3,
                b.whisker_low,
                b.whisker_high
            ));
        }
    }

    let slot = 70.0;
    let (left, top, plot_h) = (60.0, 40.0, 300.0);
    let width = left + 20.0 + distributions.len() as f64 * slot;
    let height = top + plot_h + 110.0;
    let ymax = results.iter().map(|r| r.eta2_partial).fold(0.0, f64::max).max(1e-6) * 1.05;
    let y = |v: f64| top + plot_h - v / ymax * plot_h;
    let mut doc = Svg::new(width, height);
    doc.text(left, 20.0, "Distribution of effect sizes (partial eta squared) by demographic", 13.0, Anchor::Start);
    for k in 0..=4 {
        let v = ymax * k as f64 / 4.0;
        doc.line(left - 4.0, y(v), width - 10.0, y(v), "#dddddd", 0.5);
        doc.text(left - 6.0, y(v) + 3.0, &format!("{v:.3}"), 9.0, Anchor::End);
    }
    for (pos, (b, pts)) in distributions.iter().zip(&points).enumerate() {
        let cx = left + (pos as f64 + 0.5) * slot;
        let half = slot * 0.3;
        doc.line(cx, y(b.whisker_low), cx, y(b.q1), "#333333", 1.0);
        doc.line(cx, y(b.q3), cx, y(b.whisker_high), "#333333", 1.0);
        doc.line(cx - half / 2.0, y(b.whisker_low), cx + half / 2.0, y(b.whisker_low), "#333333", 1.0);
        doc.line(cx - half / 2.0, y(b.whisker_high), cx + half / 2.0, y(b.whisker_high), "#333333", 1.0);
        doc.rect(cx - half, y(b.q3), 2.0 * half, (y(b.q1) - y(b.q3)).max(0.5), "#abd9e9");
        doc.outline(cx - half, y(b.q3), 2.0 * half, (y(b.q1) - y(b.q3)).max(0.5), "#333333");
        doc.line(cx - half, y(b.median), cx + half, y(b.median), "#000000", 2.0);
        for (i, r) in pts.iter().enumerate() {
            let fill = if r.significant { "#d73027" } else { "#555555" };
            doc.circle(cx + jitter(i) * slot * 0.7, y(r.eta2_partial), 1.6, fill, 0.6);
        }
        doc.text_rotated(cx, top + plot_h + 12.0, &b.demographic, 9.0, Anchor::End, -45.0);
    }
    doc.line(left, top + plot_h, width - 10.0, top + plot_h, "#000000", 1.0);
    Figure { stem: "fig2_effect_sizes", csv, svg: doc.finish(&stamp.line()) }
}

pub fn figure3(results: &[SensitivityResult], summaries: &[FeatureSensitivitySummary], stamp: &Stamp) -> Figure {
    let mut csv = stamp.csv_preamble();
    csv.push_str("feature,demographic,eta2_partial,p_fdr\n");
    let rows: Vec<&str> =
        summaries.iter().filter(|s| s.n_significant > 0).map(|s| s.feature_name.as_str()).collect();
    let sig: BTreeMap<(&str, &str), &SensitivityResult> = results
        .iter()
        .filter(|r| r.significant)
        .map(|r| ((r.feature_name.as_str(), r.demographic_name.as_str()), r))
        .collect();
    for f in &rows {
        for d in DEMOGRAPHIC_COLUMNS {
            if let Some(r) = sig.get(&(*f, d)) {
                csv.push_str(&format!("{f},{d},{},{}\n", r.eta2_partial, r.p_fdr));
            }
        }
    }

    let cell = 16.0;
    let (left, top) = (110.0, 120.0);
    let title = "Significant feature-demographic associations (partial eta squared)";
    if rows.is_empty() {
        let mut doc = Svg::new(420.0, 120.0);
        doc.text(10.0, 20.0, title, 12.0, Anchor::Start);
        doc.text(210.0, 70.0, EMPTY_HEATMAP_TEXT, 14.0, Anchor::Middle);
        return Figure { stem: "fig3_heatmap", csv, svg: doc.finish(&stamp.line()) };
    }
    let width = left + DEMOGRAPHIC_COLUMNS.len() as f64 * cell + 120.0;
    let height = top + rows.len() as f64 * cell + 20.0;
    let vmax = sig.values().map(|r| r.eta2_partial).fold(0.0, f64::max).max(1e-12);
    let mut doc = Svg::new(width, height);
    doc.text(10.0, 20.0, title, 12.0, Anchor::Start);
    for (j, d) in DEMOGRAPHIC_COLUMNS.iter().enumerate() {
        doc.text_rotated(left + (j as f64 + 0.5) * cell + 3.0, top - 4.0, d, 8.0, Anchor::Start, -60.0);
    }
    for (i, f) in rows.iter().enumerate() {
        let yy = top + i as f64 * cell;
        doc.text(left - 4.0, yy + cell * 0.7, f, 8.0, Anchor::End);
        for (j, d) in DEMOGRAPHIC_COLUMNS.iter().enumerate() {
            let xx = left + j as f64 * cell;
            match sig.get(&(*f, *d)) {
                Some(r) => doc.rect(xx, yy, cell, cell, &sequential(0.15 + 0.85 * r.eta2_partial / vmax)),
                None => doc.rect(xx, yy, cell, cell, "#f7f7f7"),
            }
        }
    }
    doc.outline(left, top, DEMOGRAPHIC_COLUMNS.len() as f64 * cell, rows.len() as f64 * cell, "#999999");
    let lx = left + DEMOGRAPHIC_COLUMNS.len() as f64 * cell + 20.0;
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        doc.rect(lx, top + (10 - k) as f64 * 8.0, 12.0, 8.0, &sequential(0.15 + 0.85 * t));
    }
    doc.text(lx + 16.0, top + 8.0, &format!("{vmax:.3}"), 8.0, Anchor::Start);
    doc.text(lx + 16.0, top + 88.0, "0", 8.0, Anchor::Start);
    Figure { stem: "fig3_heatmap", csv, svg: doc.finish(&stamp.line()) }
}

/// Line segments of a dendrogram as `(pos1, height1, pos2, height2)`, with
/// leaf positions taken from `order` and heights scaled to [0, 1].
pub fn dendrogram_segments(order: &[usize], merges: &[Merge]) -> Vec<(f64, f64, f64, f64)> {
    let n = order.len();
    let mut pos = vec![0.0; n + merges.len()];
    let mut height = vec![0.0; n + merges.len()];
    for (p, &leaf) in order.iter().enumerate() {
        pos[leaf] = p as f64;
    }
    let top = merges.iter().map(|m| m.distance).fold(0.0, f64::max);
    let scale = if top > 0.0 { 1.0 / top } else { 0.0 };
    let mut segs = Vec::with_capacity(3 * merges.len());
    for (s, m) in merges.iter().enumerate() {
        let id = n + s;
        let h = m.distance * scale;
        pos[id] = (pos[m.left] + pos[m.right]) / 2.0;
        height[id] = h;
        segs.push((pos[m.left], height[m.left], pos[m.left], h));
        segs.push((pos[m.right], height[m.right], pos[m.right], h));
        segs.push((pos[m.left], h, pos[m.right], h));
    }
    segs
}

pub fn figure4(cim: &CimLayout, stamp: &Stamp) -> Figure {
    let mut csv = stamp.csv_preamble();
    csv.push_str("row_position,col_position,feature,demographic,value\n");
    for (ri, &r) in cim.row_order.iter().enumerate() {
        for (ci, &c) in cim.col_order.iter().enumerate() {
            csv.push_str(&format!("{ri},{ci},{},{},{}\n", cim.row_names[r], cim.col_names[c], cim.cell(r, c)));
        }
    }

    let (cw, ch) = (18.0, 5.0);
    let (dendro_w, dendro_h) = (80.0, 50.0);
    let left = 10.0 + dendro_w;
    let top = 40.0 + dendro_h + 90.0;
    let nr = cim.row_order.len() as f64;
    let nc = cim.col_order.len() as f64;
    let width = left + nc * cw + 110.0;
    let height = top + nr * ch + 20.0;
    let vmax = cim.cells.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-12);
    let mut doc = Svg::new(width, height);
    doc.text(10.0, 20.0, &format!("Clustered image map, sPLS components 1..{} ({} linkage, {})", cim.components, cim.linkage, cim.metric), 12.0, Anchor::Start);
    for (p1, h1, p2, h2) in dendrogram_segments(&cim.col_order, &cim.col_merges) {
        let x = |p: f64| left + (p + 0.5) * cw;
        let y = |h: f64| 40.0 + dendro_h * (1.0 - h);
        doc.line(x(p1), y(h1), x(p2), y(h2), "#444444", 0.8);
    }
    for (p1, h1, p2, h2) in dendrogram_segments(&cim.row_order, &cim.row_merges) {
        let y = |p: f64| top + (p + 0.5) * ch;
        let x = |h: f64| 10.0 + dendro_w * (1.0 - h);
        doc.line(x(h1), y(p1), x(h2), y(p2), "#444444", 0.5);
    }
    for (ci, &c) in cim.col_order.iter().enumerate() {
        doc.text_rotated(left + (ci as f64 + 0.5) * cw + 3.0, top - 4.0, &cim.col_names[c], 8.0, Anchor::Start, -60.0);
    }
    for (ri, &r) in cim.row_order.iter().enumerate() {
        for (ci, &c) in cim.col_order.iter().enumerate() {
            doc.rect(left + ci as f64 * cw, top + ri as f64 * ch, cw, ch, &diverging(cim.cell(r, c) / vmax));
        }
        doc.text(left + nc * cw + 4.0, top + (ri as f64 + 0.85) * ch, &cim.row_names[r], 4.5, Anchor::Start);
    }
    Figure { stem: "fig4_cim", csv, svg: doc.finish(&stamp.line()) }
}

/// All four figures, in order.
pub fn emit_reports(audit: &AuditOutput, cim: &CimLayout, stamp: &Stamp) -> Vec<Figure> {
    vec![
        figure1(&audit.summaries, stamp),
        figure2(&audit.results, &audit.distributions, stamp),
        figure3(&audit.results, &audit.summaries, stamp),
        figure4(cim, stamp),
    ]
}
