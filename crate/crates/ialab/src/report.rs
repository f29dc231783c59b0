//! Experiment reports as CSV tables and grouped-bar SVG figures.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ialab_core::experiment::Report;
use ialab_core::Lang;
use thiserror::Error;

pub const CSV_HEADER: &str = "lang,order,width,train_size,set,perplexity";

/// Data sets in bar order: navy, turquoise, yellow.
pub const SETS: [&str; 3] = ["train", "validation", "test"];
const COLORS: [&str; 3] = ["#000080", "#40e0d0", "#ffd700"];

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub lang: Lang,
    pub order: usize,
    pub width: usize,
    pub train_size: usize,
    /// One of [`SETS`].
    pub set: &'static str,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsvError {
    #[error("line 1: expected header {CSV_HEADER:?}")]
    Header,
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
}

/// Three rows per completed cell; skipped cells have none.
pub fn rows(report: &Report) -> Vec<Row> {
    let mut out = Vec::new();
    for (cell, p) in report.completed() {
        for (set, perplexity) in SETS.into_iter().zip([p.train, p.validation, p.test]) {
            out.push(Row { lang: cell.lang, order: cell.order, width: cell.width, train_size: cell.train_size, set, perplexity });
        }
    }
    out
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", r.lang.short_name(), r.order, r.width, r.train_size, r.set, r.perplexity);
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<Row>, CsvError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(CsvError::Header);
    }
    let mut out = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = i + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| CsvError::Row { line, message: message.to_string() };
        let f: Vec<&str> = raw.trim().split(',').collect();
        let [lang, order, width, size, set, ppl] = f[..] else {
            return Err(bad("expected 6 fields"));
        };
        out.push(Row {
            lang: Lang::from_short_name(lang).ok_or_else(|| bad("unknown language"))?,
            order: order.parse().map_err(|_| bad("bad order"))?,
            width: width.parse().map_err(|_| bad("bad width"))?,
            train_size: size.parse().map_err(|_| bad("bad train_size"))?,
            set: SETS.into_iter().find(|s| *s == set).ok_or_else(|| bad("unknown set"))?,
            perplexity: ppl.parse().map_err(|_| bad("bad perplexity"))?,
        });
    }
    Ok(out)
}

/// One figure per (training language, training size).
pub struct Figure {
    pub lang: Lang,
    pub train_size: usize,
    pub svg: String,
}

impl Figure {
    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.lang.short_name(), self.train_size)
    }
}

pub fn figures(rows: &[Row]) -> Vec<Figure> {
    let keys: BTreeSet<(Lang, usize)> = rows.iter().map(|r| (r.lang, r.train_size)).collect();
    keys.into_iter()
        .map(|(lang, train_size)| {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.lang == lang && r.train_size == train_size).collect();
            Figure { lang, train_size, svg: render(lang, train_size, &mine) }
        })
        .collect()
}

const PANEL_W: f64 = 320.0;
const PLOT_H: f64 = 240.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 50.0;
const BAR_W: f64 = 16.0;

fn lang_label(lang: Lang) -> &'static str {
    match lang {
        Lang::Sequential => "sequential",
        Lang::Concurrent => "concurrent",
    }
}

/// Bars on a log10 axis, one panel per width, one group per order.
fn render(lang: Lang, train_size: usize, rows: &[&Row]) -> String {
    let widths: BTreeSet<usize> = rows.iter().map(|r| r.width).collect();
    let orders: BTreeSet<usize> = rows.iter().map(|r| r.order).collect();
    let top = rows.iter().map(|r| r.perplexity.max(1.0).log10()).fold(0.0f64, f64::max);
    let decades = top.ceil().max(1.0) as usize;
    let y = |ppl: f64| TOP + PLOT_H - PLOT_H * ppl.max(1.0).log10() / decades as f64;

    let width_px = LEFT + PANEL_W * widths.len() as f64 + 20.0;
    let height_px = TOP + PLOT_H + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width_px:.0}" height="{height_px:.0}" viewBox="0 0 {width_px:.0} {height_px:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{} models, {} training plays</text>"#,
        width_px / 2.0,
        lang_label(lang),
        train_size
    );
    for (k, (set, color)) in SETS.iter().zip(COLORS).enumerate() {
        let x = LEFT + 110.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{x:.1}" y="28" width="10" height="10" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="37">{set}</text>"#, x + 14.0);
    }
    for d in 0..=decades {
        let yy = y(10f64.powi(d as i32));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#dddddd"/>"##,
            width_px - 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, LEFT - 6.0, yy + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">perplexity</text>"#,
        TOP + PLOT_H / 2.0,
        TOP + PLOT_H / 2.0
    );

    for (p, &width) in widths.iter().enumerate() {
        let x0 = LEFT + PANEL_W * p as f64;
        let group_w = PANEL_W / orders.len().max(1) as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">width {width}</text>"#,
            x0 + PANEL_W / 2.0,
            TOP + PLOT_H + 45.0
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
            TOP + PLOT_H,
            x0 + PANEL_W - 10.0,
            TOP + PLOT_H
        );
        for (g, &order) in orders.iter().enumerate() {
            let gx = x0 + group_w * g as f64 + group_w / 2.0;
            let _ = writeln!(s, r#"<text x="{gx:.1}" y="{:.1}" text-anchor="middle">order {order}</text>"#, TOP + PLOT_H + 18.0);
            for (k, (set, color)) in SETS.iter().zip(COLORS).enumerate() {
                let Some(r) = rows.iter().find(|r| r.width == width && r.order == order && r.set == *set) else { continue };
                let bx = gx - 1.5 * BAR_W + BAR_W * k as f64;
                let by = y(r.perplexity);
                let _ = writeln!(
                    s,
                    r#"<rect x="{bx:.1}" y="{by:.1}" width="{BAR_W:.1}" height="{:.1}" fill="{color}"><title>{set} {}</title></rect>"#,
                    TOP + PLOT_H - by,
                    r.perplexity
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
