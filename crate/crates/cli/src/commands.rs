use nalgebra::DVector;
use num_complex::Complex64;
use revhom::bvp::HomoclinicBvp;
use revhom::continuation::{continue_branch, verify_against_melnikov, Branch};
use revhom::diagrams::{crossing_diagram_in, planar_orbit, saddle_node_branch, DiagramSetup};
use revhom::duffing::{block1_bounded, bounded_xi2, homoclinic_exact, resonance_beta1, Duffing4d};
use revhom::melnikov::{example_report, Mode};
use revhom::monodromy::{check_triangularizable, monodromy_matrix, Chart, ChartLoop};
use serde_json::json;

use crate::svg::{Plot, Series};
use crate::{csv_with_header, json_with_config, provenance, Artifacts, CliError, RunConfig};

fn system(config: &RunConfig) -> Result<Duffing4d, CliError> {
    Ok(Duffing4d::new(config.example_params()?).with_coupling(config.coupling))
}

pub fn resonance(config: &RunConfig) -> Result<Artifacts, CliError> {
    let mut body = String::from("ell,beta1\n");
    for &ell in &config.params.ell {
        body.push_str(&format!("{ell},{:.10}\n", resonance_beta1(config.params.s, ell)?));
    }
    let csv = csv_with_header(config, &[], &body);
    let mut a = Artifacts { stdout: csv.clone(), ..Default::default() };
    a.files.insert("resonance.csv".into(), csv);
    Ok(a)
}

pub fn melnikov(config: &RunConfig) -> Result<Artifacts, CliError> {
    let mode = config.mode.expect("validated");
    let mut sys = system(config)?;
    let mut note = None;
    if mode == Mode::Pitchfork && sys.p.beta3 != 0.0 {
        // ā₂ and b̄₂ involve only the S-symmetric terms of the field.
        note = Some(format!(
            "beta3 = {} breaks the x2 -> -x2 symmetry, so the bifurcation at this point is transcritical; \
             abar2 and bbar2 are reported for the symmetric part (beta3 = 0), on which they depend exclusively",
            sys.p.beta3
        ));
        sys.p.beta3 = 0.0;
    }
    let report = example_report(&sys, mode, config.window())?;
    let mut result = report.to_json();
    if let Some(n) = note {
        result["note"] = json!(n);
    }
    let js = json_with_config(config, result);
    let mut a = Artifacts { stdout: js.clone(), ..Default::default() };
    a.files.insert("melnikov.json".into(), js);
    Ok(a)
}

pub fn solve(config: &RunConfig) -> Result<Artifacts, CliError> {
    let bvp = HomoclinicBvp::new(Box::new(system(config)?), config.bvp)?;
    let orbit = bvp.solve(&bvp.sample(|t| homoclinic_exact(t, 1.0)))?;
    let mut summary = orbit.to_json();
    summary["x2_extrema"] = json!(orbit.x2_extrema_count(bvp.system(), crate::figures::EXTREMA_FLOOR));
    let csv = csv_with_header(config, &[], &orbit.to_csv());
    let mut a = Artifacts { stdout: csv.clone(), ..Default::default() };
    a.files.insert("orbit.csv".into(), csv);
    a.files.insert("orbit.json".into(), json_with_config(config, summary));
    if config.output.svg {
        a.files.insert("orbit.svg".into(), crate::figures::profile_plot("orbit profile", &orbit).render(&provenance(config)));
    }
    Ok(a)
}

fn setup(config: &RunConfig) -> DiagramSetup {
    DiagramSetup { s: config.params.s, ell: config.ell(), beta3: config.params.beta3, coupling: config.coupling }
}

pub fn diagram_plot(title: &str, param: &str, branches: &[(&str, &Branch)]) -> Plot {
    let mut series = Vec::new();
    for (name, b) in branches {
        series.push(Series {
            label: format!("{name} max x2"),
            points: b.points.iter().map(|p| (p.param, p.measures.max_x2)).collect(),
            dashed: false,
        });
        series.push(Series {
            label: format!("{name} min x2"),
            points: b.points.iter().map(|p| (p.param, p.measures.min_x2)).collect(),
            dashed: true,
        });
    }
    Plot { title: title.into(), x_label: param.into(), y_label: "x2 extremes".into(), series }
}

pub fn continuation(config: &RunConfig) -> Result<Artifacts, CliError> {
    let sp = setup(config);
    let beta1 = config.beta1()?;
    let resonant = (beta1 - sp.resonance()?).abs() <= 1e-12 * beta1.abs().max(1.0);
    let param = config.param.as_str();
    let mut branches: Vec<(&str, Branch)> = Vec::new();
    let mut consistency = serde_json::Value::Null;
    let mut verify = false;
    let mode = match (param, config.params.beta3 == 0.0) {
        ("beta2", _) => Mode::SaddleNode,
        ("beta1", true) => Mode::Pitchfork,
        _ => Mode::Transcritical,
    };
    if param == "beta2" && resonant && config.params.beta2 == 0.0 {
        let range = config.range.unwrap_or([-0.3, 0.3]);
        branches.push(("branch", saddle_node_branch(&sp, range, &config.bvp, &config.continuation)?));
        verify = true;
    } else if param == "beta1" && config.switch && config.params.beta2 == 0.0 {
        let b = sp.resonance()?;
        let range = config.range.unwrap_or([b - 0.4, b + 0.4]);
        let d = crossing_diagram_in(&sp, range, &config.bvp, &config.continuation, &config.continuation)?;
        let mut sw = d.switched.into_iter();
        branches.push(("primary", d.primary));
        branches.push(("switched_plus", sw.next().expect("two switched branches")));
        branches.push(("switched_minus", sw.next().expect("two switched branches")));
        verify = true;
    } else {
        let range = config.range.ok_or_else(|| CliError::Usage(format!("continuation in `{param}` needs --range")))?;
        let (mut bvp, _) = planar_orbit(&sp, beta1, &config.bvp)?;
        bvp.set_param("beta2", config.params.beta2)?;
        let start = bvp.solve(&bvp.sample(|t| homoclinic_exact(t, 1.0)))?;
        branches.push(("branch", continue_branch(&bvp, &start, param, range, &config.continuation)?));
    }
    if verify {
        let p = revhom::duffing::ExampleParams { beta2: 0.0, ..config.example_params()? };
        let sys = Duffing4d::new(p).with_coupling(config.coupling);
        if let Ok(report) = example_report(&sys, mode, config.window()) {
            let switched: Vec<&Branch> = branches.iter().skip(1).map(|(_, b)| b).collect();
            consistency = match verify_against_melnikov(&branches[0].1, &switched, &report) {
                Ok(c) => serde_json::to_value(c).expect("json"),
                Err(e) => json!({ "inconclusive": e.to_string() }),
            };
        }
    }
    let mut a = Artifacts::default();
    for (name, b) in &branches {
        let csv = csv_with_header(config, &[format!("branch {name}, termination: {}", b.termination)], &b.to_csv());
        if a.stdout.is_empty() {
            a.stdout = csv.clone();
        }
        a.files.insert(format!("{name}.csv"), csv);
    }
    let summary = json!({
        "branches": branches.iter().map(|(n, b)| (n.to_string(), b.summary_json())).collect::<serde_json::Map<_, _>>(),
        "melnikov_consistency": consistency,
    });
    a.files.insert("summary.json".into(), json_with_config(config, summary));
    if config.output.svg {
        let refs: Vec<(&str, &Branch)> = branches.iter().map(|(n, b)| (*n, b)).collect();
        a.files.insert("diagram.svg".into(), diagram_plot("bifurcation diagram", param, &refs).render(&provenance(config)));
    }
    Ok(a)
}

fn cvec(v: [f64; 2]) -> DVector<Complex64> {
    DVector::from_vec(vec![Complex64::new(v[0], 0.0), Complex64::new(v[1], 0.0)])
}

pub fn monodromy(config: &RunConfig) -> Result<Artifacts, CliError> {
    let p = config.example_params()?;
    let mut per_block = serde_json::Map::new();
    for &block in &config.blocks {
        let bounded = match block {
            1 => Some(cvec(block1_bounded(0.0))),
            _ if p.is_resonant() && p.ell <= 2 => {
                let (x, dx) = bounded_xi2(0.0, p.s, p.ell)?;
                Some(cvec([x, dx]))
            }
            _ => None,
        };
        let mut rows = Vec::new();
        for &eps in &config.epsilons {
            let plus = monodromy_matrix(block, &p, &ChartLoop::new(Chart::Plus, eps)?)?;
            let minus = monodromy_matrix(block, &p, &ChartLoop::new(Chart::Minus, eps)?)?;
            let d = check_triangularizable(&plus, &minus, bounded.as_ref())?;
            rows.push(json!({
                "epsilon": eps,
                "plus": plus.to_json(),
                "minus": minus.to_json(),
                "common_eigenvector_angle": d.angle,
                "triangularizable": d.triangularizable,
                "bounded_residuals": d.bounded_residuals,
                "bounded_fixed": d.bounded_fixed,
            }));
        }
        per_block.insert(format!("block{block}"), json!(rows));
    }
    let js = json_with_config(config, serde_json::Value::Object(per_block));
    let mut a = Artifacts { stdout: js.clone(), ..Default::default() };
    a.files.insert("monodromy.json".into(), js);
    Ok(a)
}
