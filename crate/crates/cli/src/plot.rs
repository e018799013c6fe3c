//! SVG curves of a comparison: mean across seeds with a ±1 std band.

use std::path::Path;

use anyhow::anyhow;
use plotters::prelude::*;
use treerpo::eval_harness::{ArmResult, MeanStd};

const PALETTE: [RGBColor; 4] =
    [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(44, 160, 44), RGBColor(148, 103, 189)];

#[derive(Debug, Clone, Copy)]
pub enum Metric {
    Pass1,
    ResponseLength,
}

impl Metric {
    fn pick(self, p: &MeanStd, l: &MeanStd) -> MeanStd {
        match self {
            Metric::Pass1 => *p,
            Metric::ResponseLength => *l,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Metric::Pass1 => "pass@1",
            Metric::ResponseLength => "mean response tokens",
        }
    }
}

pub fn plot_curves(arms: &[ArmResult], metric: Metric, path: &Path) -> anyhow::Result<()> {
    let series: Vec<(String, Vec<(usize, MeanStd)>)> = arms
        .iter()
        .map(|a| {
            let pts = a.aggregate().into_iter().map(|(it, p, l)| (it, metric.pick(&p, &l))).collect();
            (a.label.clone(), pts)
        })
        .collect();
    let max_iter = series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0)).max().unwrap_or(1).max(1);
    let y_max = match metric {
        Metric::Pass1 => 1.0,
        Metric::ResponseLength => {
            series.iter().flat_map(|(_, s)| s.iter().map(|(_, m)| m.mean + m.std)).fold(1.0, f64::max) * 1.1
        }
    };

    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .caption(metric.label(), ("sans-serif", 20))
        .build_cartesian_2d(0..max_iter, 0.0..y_max)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("iteration").y_desc(metric.label()).draw().map_err(plot_err)?;

    for (i, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band: Vec<(usize, f64)> = pts.iter().map(|(x, m)| (*x, m.mean + m.std)).collect();
        band.extend(pts.iter().rev().map(|(x, m)| (*x, (m.mean - m.std).max(0.0))));
        chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.15).filled()))).map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(pts.iter().map(|(x, m)| (*x, m.mean)), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn plot_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("plotting failed: {e:?}")
}
