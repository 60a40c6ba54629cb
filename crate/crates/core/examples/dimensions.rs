//! Standard, complete, expected and effective dimensions for the reference
//! models, plus one custom model.

use latent_class::dimension::{reference_reports, reports_text};
use latent_class::{dimension_report, two_way_deficiency, ModelSpec};

fn main() -> latent_class::Result<()> {
    print!("{}", reports_text(&reference_reports(5, 0)));
    let spec = ModelSpec::new(vec![2; 16], 2)?;
    let rep = dimension_report(&spec, 3, 0);
    println!(
        "\n16 binary variables, r = 2: standard {}, effective {}",
        rep.standard, rep.effective
    );
    let d = two_way_deficiency(4, 4, 2);
    println!("4x4 two-way table, r = 2: deficiency {}", d.value);
    Ok(())
}
