//! Bare line plot: axes and one polyline per series.

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn line_plot(title: &str, x: &[f64], series: &[(&str, &[f64])]) -> String {
    let finite = |v: &&f64| v.is_finite();
    let (x0, x1) = bounds(x.iter().filter(finite).copied());
    let (y0, y1) = bounds(series.iter().flat_map(|(_, s)| s.iter().filter(finite).copied()));
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += &format!(
        "<path d=\"M{PAD} {PAD} V{b} H{r}\" fill=\"none\" stroke=\"black\"/>\n",
        b = H - PAD,
        r = W - PAD
    );
    out += &format!("<text x=\"{PAD}\" y=\"{}\" font-size=\"14\">{}</text>\n", PAD / 2.0, escape(title));
    for (v, anchor, xx, yy) in [
        (x0, "start", PAD, H - PAD / 2.0),
        (x1, "end", W - PAD, H - PAD / 2.0),
    ] {
        out += &format!("<text x=\"{xx}\" y=\"{yy}\" font-size=\"11\" text-anchor=\"{anchor}\">{v:.3}</text>\n");
    }
    for (v, yy) in [(y0, H - PAD), (y1, PAD)] {
        out += &format!(
            "<text x=\"{}\" y=\"{yy:.1}\" font-size=\"11\" text-anchor=\"end\">{v:.3}</text>\n",
            PAD - 4.0
        );
    }
    for (k, (name, s)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(s.iter())
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
            .collect();
        out += &format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        );
        out += &format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\" text-anchor=\"end\">{}</text>\n",
            W - PAD,
            PAD + 14.0 * (k as f64 + 1.0),
            escape(name)
        );
    }
    out += "</svg>\n";
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        return (c - 0.5, c + 0.5);
    }
    (lo, hi)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
