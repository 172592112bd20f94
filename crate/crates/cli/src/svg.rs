//! Deterministic SVG plots. Pure string assembly with fixed-precision
//! coordinates: the same inputs always produce byte-identical files.

use std::fmt::Write as _;

use noisydet_core::anchors::CensusRow;
use noisydet_core::froc::{BootstrapSummary, FrocCurve};

use crate::boot::BandPoint;

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

fn px(v: f64) -> String {
    format!("{v:.2}")
}

/// Grouped bar chart of positives/lesion on a log10 scale, one group per
/// criterion, one bar per noise level.
pub fn census_bar_chart(rows: &[CensusRow], criteria: &[String], levels: &[String]) -> String {
    let (width, height) = (760.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 30.0, 50.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;

    let max_value = rows
        .iter()
        .map(|r| r.positives_per_lesion)
        .fold(1.0f64, f64::max);
    let decades = (max_value.log10().ceil() as i32).max(1);
    let y_for = |v: f64| top + plot_h * (1.0 - v.max(1.0).log10() / decades as f64);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">Positive anchors per lesion</text>\n",
        left + plot_w / 2.0
    );

    // Log-scale gridlines and tick labels at powers of 10.
    for d in 0..=decades {
        let v = 10f64.powi(d);
        let y = y_for(v);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            px(left),
            px(y),
            px(left + plot_w),
            px(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            px(left - 8.0),
            px(y + 4.0),
            v
        );
    }

    let group_w = plot_w / criteria.len().max(1) as f64;
    let bar_w = (group_w * 0.8) / levels.len().max(1) as f64;
    for (ci, criterion) in criteria.iter().enumerate() {
        let group_x = left + ci as f64 * group_w;
        for (li, level) in levels.iter().enumerate() {
            let Some(row) = rows
                .iter()
                .find(|r| &r.criterion == criterion && &r.level == level)
            else {
                continue;
            };
            let x = group_x + group_w * 0.1 + li as f64 * bar_w;
            let y = y_for(row.positives_per_lesion);
            let color = PALETTE[li % PALETTE.len()];
            let _ = write!(
                svg,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\"/>\n",
                px(x),
                px(y),
                px(bar_w * 0.9),
                px(top + plot_h - y)
            );
        }
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{criterion}</text>\n",
            px(group_x + group_w / 2.0),
            px(height - bottom + 20.0)
        );
    }

    // Level legend.
    for (li, level) in levels.iter().enumerate() {
        let y = top + 10.0 + li as f64 * 18.0;
        let color = PALETTE[li % PALETTE.len()];
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            px(width - right + 14.0),
            px(y - 10.0)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\">{level}</text>\n",
            px(width - right + 32.0),
            px(y)
        );
    }

    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(left),
        px(top),
        px(left),
        px(top + plot_h)
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(left),
        px(top + plot_h),
        px(left + plot_w),
        px(top + plot_h)
    );
    svg.push_str("</svg>\n");
    svg
}

/// FROC step curve, optionally with a bootstrap confidence band and the
/// interval in the caption.
pub fn froc_chart(
    curve: &FrocCurve,
    band: Option<&[BandPoint]>,
    afroc: f64,
    summary: Option<&BootstrapSummary>,
) -> String {
    let (width, height) = (640.0, 460.0);
    let (left, right, top, bottom) = (60.0, 20.0, 30.0, 60.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let x_for = |fp: f64| left + plot_w * (fp / curve.fp_cut);
    let y_for = |s: f64| top + plot_h * (1.0 - s);

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(svg, "<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n");

    // Grid and ticks.
    for k in 0..=4 {
        let fp = curve.fp_cut * k as f64 / 4.0;
        let x = x_for(fp);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            px(x),
            px(top),
            px(x),
            px(top + plot_h)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{fp:.2}</text>\n",
            px(x),
            px(top + plot_h + 18.0)
        );
    }
    for k in 0..=5 {
        let s = k as f64 / 5.0;
        let y = y_for(s);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n",
            px(left),
            px(y),
            px(left + plot_w),
            px(y)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{s:.1}</text>\n",
            px(left - 8.0),
            px(y + 4.0)
        );
    }

    if let Some(band) = band {
        if !band.is_empty() {
            let mut d = String::new();
            for (i, p) in band.iter().enumerate() {
                let cmd = if i == 0 { 'M' } else { 'L' };
                let _ = write!(d, "{cmd}{},{} ", px(x_for(p.fp)), px(y_for(p.hi)));
            }
            for p in band.iter().rev() {
                let _ = write!(d, "L{},{} ", px(x_for(p.fp)), px(y_for(p.lo)));
            }
            d.push('Z');
            let _ = write!(
                svg,
                "<path d=\"{d}\" fill=\"#4c72b0\" fill-opacity=\"0.25\" stroke=\"none\"/>\n"
            );
        }
    }

    // Step path: sensitivity is 0 before the first operating point and
    // extends horizontally to the cut.
    let mut d = String::new();
    let _ = write!(d, "M{},{} ", px(x_for(0.0)), px(y_for(curve.sensitivity_at(0.0))));
    for p in &curve.points {
        let _ = write!(d, "H{} V{} ", px(x_for(p.fp_per_image)), px(y_for(p.sensitivity)));
    }
    let _ = write!(d, "H{}", px(x_for(curve.fp_cut)));
    let _ = write!(
        svg,
        "<path d=\"{d}\" fill=\"none\" stroke=\"#4c72b0\" stroke-width=\"2\"/>\n"
    );

    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(left),
        px(top),
        px(left),
        px(top + plot_h)
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        px(left),
        px(top + plot_h),
        px(left + plot_w),
        px(top + plot_h)
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">False positives per image</text>\n",
        px(left + plot_w / 2.0),
        px(height - 18.0)
    );
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">Sensitivity</text>\n",
        px(top + plot_h / 2.0),
        px(top + plot_h / 2.0)
    );

    let caption = match summary {
        Some(s) => format!(
            "AFROC={afroc:.3} CI=[{:.3},{:.3}] ({} resamples of {} cases)",
            s.ci_low, s.ci_high, s.n_resamples, s.resample_size
        ),
        None => format!("AFROC={afroc:.3}"),
    };
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{caption}</text>\n",
        px(left + plot_w / 2.0),
        px(top - 10.0)
    );
    svg.push_str("</svg>\n");
    svg
}
