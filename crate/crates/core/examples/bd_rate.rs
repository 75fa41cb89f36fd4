// Average bit-rate saving of one rate-distortion curve over another.

use lfic::bdrate::{bd_rate, format_bd_rate, parse_rd_csv, RdCurve};

fn main() {
    let anchor = parse_rd_csv("rate,quality\n0.1,80\n0.2,88\n0.4,93\n0.8,96\n").unwrap();
    let half = RdCurve::from_pairs(&[(0.05, 80.0), (0.1, 88.0), (0.2, 93.0), (0.4, 96.0)]).unwrap();
    let worse =
        RdCurve::from_pairs(&[(0.12, 79.0), (0.25, 87.5), (0.5, 92.8), (1.0, 96.5)]).unwrap();
    println!(
        "half the bits:  {}",
        format_bd_rate(bd_rate(&anchor, &half).unwrap())
    );
    println!(
        "worse encoder:  {}",
        format_bd_rate(bd_rate(&anchor, &worse).unwrap())
    );
    println!(
        "self:           {}",
        format_bd_rate(bd_rate(&anchor, &anchor).unwrap())
    );
}
