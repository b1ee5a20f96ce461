//! Classifies (epsilon, t) sequences and tabulates the scale functions of each regime.
use pamlab::scaling::{classify_regime, PowerLaw, RegimeRecord};

fn main() -> pamlab::Result<()> {
    let gamma1 = 1.720035;
    let cases = [
        ("eps fixed, t -> inf", 0.5, PowerLaw::constant(1.0), PowerLaw::new(1.0, 1.0)),
        ("eps ~ t^-1/1.5", 0.5, PowerLaw::new(1.0, -1.0), PowerLaw::new(1.0, 1.5)),
        ("eps -> 0 faster than t^-1/1.5", 0.5, PowerLaw::new(1.0, -1.0), PowerLaw::new(1.0, 1.0)),
        ("critical, t -> inf", 2.0, PowerLaw::constant(1.0), PowerLaw::new(1.0, 1.0)),
        ("critical, t fixed", 2.0, PowerLaw::new(1.0, -1.0), PowerLaw::constant(1.0)),
        ("supercritical", 2.5, PowerLaw::new(1.0, -1.0), PowerLaw::constant(1.0)),
    ];
    println!("{}", RegimeRecord::csv_header());
    for (label, omega, e, t) in cases {
        let regime = classify_regime(omega, e, t)?;
        let m = 16.0;
        let rec = RegimeRecord::new(regime, e.at(m), t.at(m), 1.0, omega, gamma1, None);
        println!("{}  # {label}", rec.csv_row());
    }
    Ok(())
}
