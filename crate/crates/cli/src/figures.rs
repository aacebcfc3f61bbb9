//! Data sets behind the bifurcation diagrams and orbit profiles of the
//! example at s = 2: saddle-node diagrams in β₂ (β₃ = 4), transcritical
//! crossings in β₁ (β₃ = 4) and pitchfork crossings in β₁ (β₃ = 0), each for
//! ℓ = 0, 1, 2, plus the orbit profiles at selected parameter values.

use revhom::bvp::{HomoclinicBvp, HomoclinicOrbit};
use revhom::continuation::Branch;
use revhom::diagrams::{crossing_diagram, diagram_bvp, profiles_at, saddle_node_branch, DiagramSetup};
use serde_json::json;

use crate::commands::diagram_plot;
use crate::svg::{Plot, Series};
use crate::{csv_with_header, json_with_config, provenance, Artifacts, CliError, RunConfig};

/// Fraction of max |x₂| below which x₂ is treated as numerically zero when
/// counting extrema.
pub const EXTREMA_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, Copy)]
enum Diagram {
    /// Continuation in β₂ over the range.
    SaddleNode([f64; 2]),
    /// Continuation in β₁ over [β₁* − w, β₁* + w].
    Crossing(f64),
}

#[derive(Debug, Clone)]
struct Panel {
    id: &'static str,
    ell: u32,
    beta3: f64,
    diagram: Diagram,
    /// (profile panel id, parameter value).
    profiles: Vec<(&'static str, f64)>,
}

fn panels() -> Vec<Panel> {
    let sn = Diagram::SaddleNode([-0.3, 0.3]);
    vec![
        Panel { id: "fig5a", ell: 0, beta3: 4.0, diagram: sn, profiles: vec![("fig6a", -0.1)] },
        Panel { id: "fig5b", ell: 1, beta3: 4.0, diagram: sn, profiles: vec![("fig6b", -0.05)] },
        Panel { id: "fig5c", ell: 2, beta3: 4.0, diagram: sn, profiles: vec![("fig6c", -0.006)] },
        Panel { id: "fig7a", ell: 0, beta3: 4.0, diagram: Diagram::Crossing(0.4), profiles: vec![("fig8a1", 1.5), ("fig8a2", 2.0)] },
        Panel { id: "fig7b", ell: 1, beta3: 4.0, diagram: Diagram::Crossing(0.4), profiles: vec![("fig8b1", 7.7), ("fig8b2", 7.3)] },
        Panel { id: "fig7c", ell: 2, beta3: 4.0, diagram: Diagram::Crossing(0.4), profiles: vec![("fig8c1", 17.3), ("fig8c2", 17.4)] },
        Panel { id: "fig9a", ell: 0, beta3: 0.0, diagram: Diagram::Crossing(0.4), profiles: vec![("fig10a", 2.0)] },
        Panel { id: "fig9b", ell: 1, beta3: 0.0, diagram: Diagram::Crossing(0.7), profiles: vec![("fig10b", 7.0)] },
        Panel { id: "fig9c", ell: 2, beta3: 0.0, diagram: Diagram::Crossing(1.5), profiles: vec![("fig10c", 16.0)] },
    ]
}

pub fn profile_plot(title: &str, orbit: &HomoclinicOrbit) -> Plot {
    let (ts, xs) = orbit.full_orbit();
    let comp = |k: usize| ts.iter().zip(&xs).map(|(t, x)| (*t, x[k])).collect::<Vec<_>>();
    Plot {
        title: title.into(),
        x_label: "t".into(),
        y_label: "state".into(),
        series: vec![
            Series { label: "x1".into(), points: comp(0), dashed: true },
            Series { label: "x2".into(), points: comp(1), dashed: false },
        ],
    }
}

struct PanelOutput {
    files: Vec<(String, String)>,
    summary: serde_json::Value,
}

fn run_panel(config: &RunConfig, panel: &Panel) -> Result<PanelOutput, CliError> {
    let setup = DiagramSetup { s: 2.0, ell: panel.ell, beta3: panel.beta3, coupling: config.coupling };
    let beta1 = setup.resonance()?;
    let bvp: HomoclinicBvp = diagram_bvp(&setup, beta1, &config.bvp)?;
    let (param, named): (&str, Vec<(&str, Branch)>) = match panel.diagram {
        Diagram::SaddleNode(range) => {
            ("beta2", vec![("branch", saddle_node_branch(&setup, range, &config.bvp, &config.continuation)?)])
        }
        Diagram::Crossing(w) => {
            let d = crossing_diagram(&setup, w, &config.bvp, &config.continuation, &config.continuation)?;
            let mut sw = d.switched.into_iter();
            let plus = sw.next().expect("two switched branches");
            let minus = sw.next().expect("two switched branches");
            ("beta1", vec![("primary", d.primary), ("switched_plus", plus), ("switched_minus", minus)])
        }
    };
    let mut files = Vec::new();
    let mut branch_summaries = serde_json::Map::new();
    for (name, b) in &named {
        let extra = [format!("panel {} ({name}), s = 2, ell = {}, beta3 = {}, termination: {}", panel.id, panel.ell, panel.beta3, b.termination)];
        files.push((format!("{}_{name}.csv", panel.id), csv_with_header(config, &extra, &b.to_csv())));
        branch_summaries.insert(name.to_string(), b.summary_json());
    }
    if config.output.svg {
        let refs: Vec<(&str, &Branch)> = named.iter().map(|(n, b)| (*n, b)).collect();
        let title = format!("{}: s = 2, ell = {}, beta3 = {}", panel.id, panel.ell, panel.beta3);
        files.push((format!("{}.svg", panel.id), diagram_plot(&title, param, &refs).render(&provenance(config))));
    }
    let mut profiles = Vec::new();
    for (pid, value) in &panel.profiles {
        // Profiles show orbits off the invariant plane: skip the planar primary.
        let mut orbits = Vec::new();
        for (name, b) in &named {
            if *name == "primary" {
                continue;
            }
            orbits.extend(profiles_at(&bvp, b, *value)?);
        }
        let mut entries = Vec::new();
        for (k, orbit) in orbits.iter().enumerate() {
            let file = format!("{pid}_orbit{}.csv", k + 1);
            let extrema = orbit.x2_extrema_count(bvp.system(), EXTREMA_FLOOR);
            let extra = [format!("profile {pid}: {param} = {value}, ell = {}, x2 extrema on [-T, 0] = {extrema}", panel.ell)];
            files.push((file.clone(), csv_with_header(config, &extra, &orbit.to_csv())));
            if config.output.svg {
                let title = format!("{pid}: {param} = {value}, ell = {}", panel.ell);
                files.push((format!("{pid}_orbit{}.svg", k + 1), profile_plot(&title, orbit).render(&provenance(config))));
            }
            entries.push(json!({
                "file": file,
                "x2_at_0": orbit.measures.x2_at_0,
                "x2_extrema": extrema,
                "expected_extrema": panel.ell + 1,
            }));
        }
        profiles.push(json!({ "id": pid, "param": param, "value": value, "orbits": entries }));
    }
    let summary = json!({
        "id": panel.id,
        "ell": panel.ell,
        "beta3": panel.beta3,
        "param": param,
        "branches": branch_summaries,
        "profiles": profiles,
    });
    Ok(PanelOutput { files, summary })
}

/// Computes every panel (concurrently; each panel writes its own files) and
/// a manifest `figures.json`.
pub fn figures(config: &RunConfig) -> Result<Artifacts, CliError> {
    let panels = panels();
    let results: Vec<Result<PanelOutput, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = panels.iter().map(|p| scope.spawn(move || run_panel(config, p))).collect();
        handles.into_iter().map(|h| h.join().expect("panel thread panicked")).collect()
    });
    let mut a = Artifacts::default();
    let mut summaries = Vec::new();
    for r in results {
        let out = r?;
        for (name, content) in out.files {
            a.files.insert(name, content);
        }
        summaries.push(out.summary);
    }
    let manifest = json_with_config(config, json!({ "panels": summaries }));
    a.stdout = format!("wrote {} files\n", a.files.len() + 1);
    a.files.insert("figures.json".into(), manifest);
    Ok(a)
}
