//! Closed-form exponent evaluation; no randomness.

use slelab::angular::nu;
use slelab::exponents::{
    check_cascade, dimensions, eta, landmark_table, parse_num, xi, xi_1_lambda, xi_tilde,
    zeta_2_lambda, zeta_n, ExponentValue, Num, PackVector,
};

use super::Outcome;
use crate::error::{require, CliError, CliResult};
use crate::manifest::Metric;
use crate::row;
use crate::table::Table;

/// Formulas accepted by `exponents eval`.
pub const FORMULAS: [&str; 7] = [
    "zeta-n",
    "zeta-2-lambda",
    "xi-1-lambda",
    "xi",
    "xi-tilde",
    "eta",
    "nu",
];

fn exact_cell(v: &ExponentValue) -> String {
    v.exact.map(|r| r.to_string()).unwrap_or_default()
}

fn parse_all(args: &[String]) -> CliResult<Vec<Num>> {
    args.iter()
        .map(|a| parse_num(a).map_err(CliError::from))
        .collect()
}

fn single(args: &[String], what: &str) -> CliResult<Num> {
    require(args.len() == 1, || {
        format!("{what} takes exactly one argument, got {}", args.len())
    })?;
    Ok(parse_num(&args[0])?)
}

/// Evaluates one formula; table `exponent`.
pub fn eval(formula: &str, args: &[String]) -> CliResult<Outcome> {
    let value = match formula {
        "zeta-n" => {
            let n = single(args, "zeta-n")?;
            let n = n.exact().filter(|r| r.is_integer()).ok_or_else(|| {
                CliError::Precondition(format!("zeta-n needs an integer n, got {n}"))
            })?;
            zeta_n(*n.numer())?
        }
        "zeta-2-lambda" => zeta_2_lambda(single(args, "zeta-2-lambda")?)?,
        "xi-1-lambda" => xi_1_lambda(single(args, "xi-1-lambda")?)?,
        "xi" => xi(&PackVector::new(parse_all(args)?)?)?,
        "xi-tilde" => xi_tilde(&PackVector::new(parse_all(args)?)?)?,
        "eta" => eta(single(args, "eta")?)?,
        "nu" => {
            require(args.len() == 2, || {
                format!("nu takes κ and b, got {} arguments", args.len())
            })?;
            let vals = parse_all(args)?;
            let v = nu(vals[0].value(), vals[1].value())?;
            let mut t = Table::new(
                "exponent",
                &["formula", "arguments", "exact", "value", "in_region"],
            );
            t.push(row!["nu", args.join(" "), "", v, true]);
            return Ok(Outcome {
                tables: vec![t],
                metrics: vec![Metric::value("value", v)],
                ..Outcome::default()
            });
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown formula `{other}`; expected one of {}",
                FORMULAS.join(", ")
            )))
        }
    };
    let mut t = Table::new(
        "exponent",
        &["formula", "arguments", "exact", "value", "in_region"],
    );
    t.push(row![
        value.formula.name(),
        args.join(" "),
        exact_cell(&value),
        value.value,
        value.in_region
    ]);
    Ok(Outcome {
        tables: vec![t],
        metrics: vec![Metric::value("value", value.value)],
        ..Outcome::default()
    })
}

/// Landmark exponents and the dimension table; tables `landmarks` and `dimensions`.
pub fn table() -> Outcome {
    let mut land = Table::new(
        "landmarks",
        &["name", "exact", "value", "formula", "in_region"],
    );
    let mut metrics = Vec::new();
    for (name, v) in landmark_table() {
        land.push(row![
            name,
            exact_cell(&v),
            v.value,
            v.formula.name(),
            v.in_region
        ]);
        metrics.push(Metric::value(name, v.value));
    }
    let mut dims = Table::new(
        "dimensions",
        &[
            "set",
            "exponent",
            "exponent_exact",
            "dimension",
            "dimension_exact",
            "requires_analyticity",
        ],
    );
    for d in dimensions() {
        dims.push(row![
            d.name,
            d.exponent_symbol,
            exact_cell(&d.exponent),
            d.dimension.value,
            exact_cell(&d.dimension),
            d.requires_analyticity
        ]);
    }
    Outcome {
        tables: vec![land, dims],
        metrics,
        ..Outcome::default()
    }
}

/// Cascade residual for one split; table `cascade`.
pub fn cascade(packs: &[String], q: usize) -> CliResult<Outcome> {
    let pv = PackVector::new(parse_all(packs)?)?;
    let c = check_cascade(&pv, q)?;
    let mut t = Table::new(
        "cascade",
        &["packs", "q", "lhs", "rhs", "residual", "in_region"],
    );
    t.push(row![
        packs.join(" "),
        q,
        c.lhs.display(),
        c.rhs.display(),
        c.residual,
        c.in_region
    ]);
    Ok(Outcome {
        tables: vec![t],
        metrics: vec![Metric::value("residual", c.residual)],
        ..Outcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn table_contains_landmarks() {
        let out = table();
        let land = out.table("landmarks").unwrap();
        let find = |name: &str| {
            land.rows
                .iter()
                .find(|r| r[0] == name)
                .map(|r| r[1].clone())
        };
        assert_eq!(find("zeta_2").as_deref(), Some("5/8"));
        assert_eq!(find("xi(1,1)").as_deref(), Some("5/4"));
        assert_eq!(find("xi_tilde(1,1,1)").as_deref(), Some("7"));
        assert_eq!(find("xi(1,1,1)").as_deref(), Some("35/12"));
    }

    #[test]
    fn eval_formulas() {
        let out = eval("xi-tilde", &strings(&["1", "1"])).unwrap();
        assert_eq!(out.tables[0].rows[0][2], "10/3");
        assert_eq!(
            eval("eta", &strings(&["7"])).unwrap().tables[0].rows[0][2],
            "35/12"
        );
        assert_eq!(
            eval("nu", &strings(&["6", "1"])).unwrap().metrics[0].value,
            1.25
        );
        assert!(matches!(eval("zeta", &[]), Err(CliError::Usage(_))));
        assert!(matches!(
            eval("zeta-n", &strings(&["1/2"])),
            Err(CliError::Precondition(_))
        ));
        assert!(eval("xi", &strings(&["-1", "1"])).is_err());
        assert!(cascade(&strings(&["1", "1", "1"]), 1).unwrap().metrics[0].value < 1e-12);
    }
}
