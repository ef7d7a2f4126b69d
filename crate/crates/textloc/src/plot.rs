//! Static PNG charts of the loss log and the few-shot curve.

use std::path::Path;
use std::sync::OnceLock;

use plotters::prelude::*;
use plotters::style::{register_font, FontStyle};

use crate::error::{AppError, AppResult};

/// System font candidates; `TEXTLOC_FONT` takes precedence.
const FONT_PATHS: &[&str] = &[
    "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf",
    "/usr/share/fonts/TTF/DejaVuSans.ttf",
    "/usr/share/fonts/dejavu/DejaVuSans.ttf",
    "/Library/Fonts/Arial.ttf",
];

/// Registers a font once. Without one, charts are drawn without text.
fn fonts_available() -> bool {
    static READY: OnceLock<bool> = OnceLock::new();
    *READY.get_or_init(|| {
        let env = std::env::var("TEXTLOC_FONT").ok();
        for path in env.iter().map(String::as_str).chain(FONT_PATHS.iter().copied()) {
            if let Ok(bytes) = std::fs::read(path) {
                let bytes: &'static [u8] = Box::leak(bytes.into_boxed_slice());
                if register_font("sans-serif", FontStyle::Normal, bytes).is_ok() {
                    return true;
                }
            }
        }
        log::warn!("no usable font found; charts will have no labels");
        false
    })
}

/// Columns of a numeric CSV with a header row.
pub fn read_csv(path: &Path) -> AppResult<(Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| AppError::data(format!("{}: empty file", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(AppError::data(format!("{}:{}: expected {} fields", path.display(), i + 2, header.len())));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(
                f.trim()
                    .parse()
                    .map_err(|_| AppError::data(format!("{}:{}: `{f}` is not a number", path.display(), i + 2)))?,
            );
        }
    }
    Ok((header, cols))
}

fn draw_err(path: &Path) -> impl Fn(String) -> AppError + '_ {
    move |e| AppError::data(format!("{}: drawing failed: {e}", path.display()))
}

const COLORS: [RGBColor; 4] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(255, 127, 14)];

struct Panel<'a> {
    title: &'a str,
    y_desc: &'a str,
    x: &'a [f64],
    series: Vec<(&'a str, &'a [f64])>,
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    }
}

fn draw_panels(path: &Path, x_desc: &str, panels: &[Panel]) -> AppResult<()> {
    let text = fonts_available();
    let err = draw_err(path);
    let (w, h) = (900usize, 360 * panels.len());
    let mut buf = vec![255u8; w * h * 3];
    {
        let root = BitMapBackend::with_buffer(&mut buf, (w as u32, h as u32)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
        for (area, p) in root.split_evenly((panels.len(), 1)).iter().zip(panels) {
            let (x0, x1) = range(p.x.iter().copied());
            let (y0, y1) = range(p.series.iter().flat_map(|(_, s)| s.iter().copied()));
            let mut builder = ChartBuilder::on(area);
            builder
                .margin(12)
                .x_label_area_size(if text { 40 } else { 8 })
                .y_label_area_size(if text { 70 } else { 8 });
            if text {
                builder.caption(p.title, ("sans-serif", 20));
            }
            let mut chart = builder.build_cartesian_2d(x0..x1, y0..y1).map_err(|e| err(e.to_string()))?;
            let mut mesh = chart.configure_mesh();
            if text {
                mesh.x_desc(x_desc).y_desc(p.y_desc);
            } else {
                mesh.x_labels(0).y_labels(0);
            }
            mesh.draw().map_err(|e| err(e.to_string()))?;
            for (i, (name, ys)) in p.series.iter().enumerate() {
                let color = COLORS[i % COLORS.len()];
                let points: Vec<(f64, f64)> = p.x.iter().copied().zip(ys.iter().copied()).filter(|(_, y)| y.is_finite()).collect();
                let s = chart
                    .draw_series(LineSeries::new(points, color.stroke_width(2)))
                    .map_err(|e| err(e.to_string()))?;
                if text {
                    s.label(*name)
                        .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
                }
            }
            if text && p.series.len() > 1 {
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(|e| err(e.to_string()))?;
            }
        }
        root.present().map_err(|e| err(e.to_string()))?;
    }
    let img = textloc_core::Image::new(w, h, 3, buf).map_err(|e| AppError::core(path.display(), e))?;
    crate::io::write_png(path, &img)
}

fn column<'a>(path: &Path, header: &[String], cols: &'a [Vec<f64>], name: &str) -> AppResult<&'a [f64]> {
    header
        .iter()
        .position(|h| h == name)
        .map(|i| cols[i].as_slice())
        .ok_or_else(|| AppError::data(format!("{}: missing column `{name}`", path.display())))
}

/// Loss curves from a `losses.csv`: generator terms on top, adversarial
/// terms below.
pub fn plot_losses(csv: &Path, png: &Path) -> AppResult<()> {
    let (h, c) = read_csv(csv)?;
    let step = column(csv, &h, &c, "step")?;
    let panels = [
        Panel {
            title: "generator content / feature loss",
            y_desc: "loss",
            x: step,
            series: vec![("content", column(csv, &h, &c, "content")?), ("feature", column(csv, &h, &c, "feature")?)],
        },
        Panel {
            title: "adversarial losses",
            y_desc: "loss",
            x: step,
            series: vec![("d_loss", column(csv, &h, &c, "d_loss")?), ("g_adv", column(csv, &h, &c, "g_adv")?)],
        },
    ];
    draw_panels(png, "step", &panels)
}

/// Precision, recall and hmean against the number of training images.
pub fn plot_fewshot(csv: &Path, png: &Path) -> AppResult<()> {
    let (h, c) = read_csv(csv)?;
    let panels = [Panel {
        title: "score vs. number of training images",
        y_desc: "score",
        x: column(csv, &h, &c, "n")?,
        series: vec![
            ("hmean", column(csv, &h, &c, "hmean")?),
            ("precision", column(csv, &h, &c, "precision")?),
            ("recall", column(csv, &h, &c, "recall")?),
        ],
    }];
    draw_panels(png, "training images n", &panels)
}
