use std::f64::consts::FRAC_PI_4;

use serde_json::json;

use qperc::analysis::{
    bethe_cutoff_scaling, bethe_saturation, bethe_thresholds, fit_cutoff_scaling, interdep_critical,
    interdep_giant_component, interdep_sweep, lattice_reference, quarter_pi_from_c,
    scale_free_exponents, CutoffCurve, ScalingWindow,
};
use qperc::exactsc::exact_classical_sc;
use qperc::fastapprox::{
    ensemble_threshold, ksp_enumerate, random_ensemble_threshold, sweep_approx, theta_grid,
    threshold_halfpoint, topology_ensemble, SmSpec,
};
use qperc::netcore::{theta_from_c, theta_from_p, LatticeFamily};
use qperc::spreduce::{bethe_exact, reduce_sp, reduce_sp_traced, sweep_sp, ReductionOrder};
use qperc::starmesh::{reduce_full, EliminationPolicy, StarMeshOptions};
use qperc::{Error, LinkWeight, Method, Network, Result, RuleSystem, SweepCurve, Topology};

use crate::args::*;
use crate::output::Recorder;

fn missing(flag: &str, family: Family) -> Error {
    Error::InvalidParameter(format!("--{flag} is required for --family {family:?}"))
}

fn topology(t: &TopologyArgs, seed: u64) -> Result<Topology> {
    let family = t
        .family
        .ok_or_else(|| Error::InvalidParameter("--family is required".into()))?;
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| missing(flag, family));
    Ok(match family {
        Family::Bethe => Topology::Bethe {
            k: need(t.k, "k")?,
            layers: need(t.layers, "L")?,
        },
        Family::Square => Topology::Square { n: need(t.n, "n")? },
        Family::Honeycomb => Topology::Honeycomb { n: need(t.n, "n")? },
        Family::Triangular => Topology::Triangular { n: need(t.n, "n")? },
        Family::Er => Topology::ErdosRenyi {
            nodes: need(t.nodes, "nodes")?,
            mean_degree: t.kbar.ok_or_else(|| missing("kbar", family))?,
            seed,
        },
        Family::Ba => Topology::BarabasiAlbert {
            nodes: need(t.nodes, "nodes")?,
            links_per_node: need(t.z, "z")?,
            seed,
        },
    })
}

fn is_random(t: &TopologyArgs) -> bool {
    matches!(t.family, Some(Family::Er | Family::Ba))
}

fn quarter_pi(value: f64, system: RuleSystem) -> Result<f64> {
    let theta = match system {
        RuleSystem::Classical => theta_from_p(value)?,
        RuleSystem::Concurrence => theta_from_c(value)?,
    };
    Ok(theta / FRAC_PI_4)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let rec = Recorder::new("generate", args, vec![args.topology.seed]);
    let topo = topology(&args.topology, args.topology.seed)?;
    let net = topo.build(LinkWeight::from_quarter_pi(args.theta)?)?;
    net.write_json(&args.out)?;
    rec.emit_json(json!({
        "file": args.out,
        "topology": topo,
        "nodes": net.node_count(),
        "edges": net.edge_count(),
        "sources": net.sources().len(),
        "targets": net.targets().len(),
    }))
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let rec = Recorder::new("sweep", args, vec![]);
    if args.points == 0 || !(args.from <= args.to) {
        return Err(Error::InvalidParameter("need --points >= 1 and --from <= --to".into()));
    }
    let lo = LinkWeight::from_quarter_pi(args.from)?.theta();
    let hi = LinkWeight::from_quarter_pi(args.to)?.theta();
    let thetas: Vec<f64> = if args.points == 1 {
        vec![hi]
    } else if lo == 0.0 && hi == FRAC_PI_4 {
        theta_grid(args.points)
    } else {
        (0..args.points)
            .map(|i| lo + (hi - lo) * i as f64 / (args.points - 1) as f64)
            .collect()
    };
    let net = Network::read_json(&args.file)?;
    let sys: RuleSystem = args.system.into();
    let curve = match args.method {
        SweepMethod::ExactSp => sweep_sp(&net, sys, &thetas)?,
        SweepMethod::StarMesh => SweepCurve::sample(&thetas, sys, Method::StarMesh, |w| {
            let opts = StarMeshOptions::default();
            Ok(reduce_full(&net.with_uniform_weight(w), sys, &EliminationPolicy::MinDegree, &opts)?.value)
        })?,
        SweepMethod::ParallelApprox => {
            let ens = ksp_enumerate(&net, &SmSpec::new(args.m))?;
            sweep_approx(&ens, sys, &thetas)?
        }
        SweepMethod::ExactClassical => {
            if sys != RuleSystem::Classical {
                return Err(Error::InvalidParameter(
                    "exact-classical only evaluates the classical rule system".into(),
                ));
            }
            SweepCurve::sample(&thetas, sys, Method::ExactClassical, |w| {
                exact_classical_sc(&net.with_uniform_weight(w))
            })?
        }
    };
    rec.emit_csv(&curve, args.out.as_deref())
}

pub fn reduce(args: &ReduceArgs) -> Result<()> {
    let rec = Recorder::new("reduce", args, vec![]);
    let net = Network::read_json(&args.file)?;
    let sys: RuleSystem = args.system.into();
    let (value, trace) = match args.method {
        ReduceMethod::Sp => {
            let r = reduce_sp_traced(&net, sys, ReductionOrder::SmallestId)?;
            (r.value, serde_json::to_value(&r.trace)?)
        }
        ReduceMethod::StarMesh => {
            let r = reduce_full(&net, sys, &EliminationPolicy::MinDegree, &StarMeshOptions::default())?;
            let extra = json!({ "eliminations": r.eliminations, "steps": r.trace });
            (r.value, extra)
        }
    };
    let mut body = json!({
        "system": sys.to_string(),
        "value": value,
        "theta": quarter_pi(value, sys)?,
    });
    if args.trace {
        body["trace"] = trace;
    }
    rec.emit_json(body)
}

pub fn threshold(args: &ThresholdArgs) -> Result<()> {
    let base = args.topology.seed;
    let seeds: Vec<u64> = if is_random(&args.topology) {
        (0..args.realizations.max(1) as u64).map(|i| base + i).collect()
    } else {
        vec![]
    };
    let rec = Recorder::new("threshold", args, seeds.clone());
    let sys: RuleSystem = args.system.into();
    let spec = match args.m {
        Some(m) => SmSpec {
            per_pair_cap: if args.cap == 0 { u64::MAX } else { args.cap },
            ..SmSpec::new(m)
        },
        None => SmSpec {
            classes: None,
            ..SmSpec::unbounded(0)
        },
    };

    if let Some(file) = &args.file {
        let net = Network::read_json(file)?;
        let est = match args.method {
            ThresholdMethod::ExactSp => {
                let curve = sweep_sp(&net, sys, &theta_grid(51))?;
                threshold_halfpoint(&curve, |w| reduce_sp(&net.with_uniform_weight(w), sys))?
            }
            ThresholdMethod::ParallelApprox => {
                let m = args.m.ok_or_else(|| {
                    Error::InvalidParameter("--m is required for parallel-approx on a file".into())
                })?;
                ensemble_threshold(&ksp_enumerate(&net, &SmSpec { classes: Some(m), ..spec })?, sys)?
            }
            ThresholdMethod::BetheRecursion => {
                return Err(Error::InvalidParameter(
                    "bethe-recursion needs --family bethe, not a file".into(),
                ))
            }
        };
        return rec.emit_json(json!({ "method": args.method, "estimate": est }));
    }

    if is_random(&args.topology) {
        if args.method != ThresholdMethod::ParallelApprox || args.m.is_none() {
            return Err(Error::InvalidParameter(
                "random topologies use --method parallel-approx with --m".into(),
            ));
        }
        // Fail on bad flags here rather than inside the workers.
        topology(&args.topology, base)?;
        let est = if seeds.len() >= 2 {
            let ens = random_ensemble_threshold(
                |seed| topology(&args.topology, seed).expect("validated"),
                &seeds,
                &spec,
                sys,
            )?;
            serde_json::to_value(ens)?
        } else {
            let ens = topology_ensemble(&topology(&args.topology, base)?, &spec)?;
            serde_json::to_value(ensemble_threshold(&ens, sys)?)?
        };
        return rec.emit_json(json!({ "method": args.method, "estimate": est }));
    }

    let topo = topology(&args.topology, base)?;
    let est = match (args.method, &topo) {
        (ThresholdMethod::ParallelApprox, _) => {
            if args.m.is_none() && !matches!(topo, Topology::Bethe { .. }) {
                return Err(Error::InvalidParameter(
                    "--m is required for parallel-approx except on Bethe trees".into(),
                ));
            }
            ensemble_threshold(&topology_ensemble(&topo, &spec)?, sys)?
        }
        (ThresholdMethod::BetheRecursion, Topology::Bethe { k, layers }) => {
            let (k, layers) = (*k, *layers);
            let curve = SweepCurve::sample(&theta_grid(51), sys, Method::BetheRecursion, |w| {
                bethe_exact(k, layers, sys, w)
            })?;
            threshold_halfpoint(&curve, |w| bethe_exact(k, layers, sys, w))?
        }
        (ThresholdMethod::BetheRecursion, _) => {
            return Err(Error::InvalidParameter(
                "bethe-recursion only applies to --family bethe".into(),
            ))
        }
        (ThresholdMethod::ExactSp, _) => {
            let net = topo.build(LinkWeight::new(FRAC_PI_4)?)?;
            let curve = sweep_sp(&net, sys, &theta_grid(51))?;
            threshold_halfpoint(&curve, |w| reduce_sp(&net.with_uniform_weight(w), sys))?
        }
    };
    rec.emit_json(json!({ "method": args.method, "estimate": est }))
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let rec = Recorder::new("analyze", &args.what, vec![]);
    match args.what {
        Analysis::Thresholds { k } => {
            let bethe = bethe_thresholds(k)?;
            let c_sat = bethe_saturation(k)?;
            let lattices: Vec<_> = [LatticeFamily::Square, LatticeFamily::Honeycomb, LatticeFamily::Triangular]
                .into_iter()
                .map(lattice_reference)
                .collect();
            rec.emit_json(json!({
                "bethe": bethe,
                "saturation": { "c": c_sat, "theta": quarter_pi_from_c(c_sat)? },
                "lattices": lattices,
            }))
        }
        Analysis::Scaling {
            k,
            system,
            dmin,
            dmax,
            distances,
            lmin,
            lmax,
        } => {
            let window = ScalingWindow {
                distance_min: dmin,
                distance_max: dmax,
                distances,
                length_min: lmin,
                length_max: lmax,
                ..ScalingWindow::default()
            };
            rec.emit_json(bethe_cutoff_scaling(k, system.into(), &window)?)
        }
        Analysis::Interdep { n, kbar, sweep } => {
            let crit = interdep_critical(kbar, n)?;
            let mut body = json!({
                "critical": crit,
                "giant_above": interdep_giant_component(kbar, (crit.p_th + 1e-6).min(1.0), n)?.giant,
            });
            if let Some(points) = sweep {
                if points < 2 {
                    return Err(Error::InvalidParameter("--sweep needs at least 2 points".into()));
                }
                let ps: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
                body["sweep"] = serde_json::to_value(interdep_sweep(kbar, n, &ps)?)?;
            }
            rec.emit_json(body)
        }
        Analysis::Exponents { lambda } => {
            let e = scale_free_exponents(lambda)?;
            let (beta_residual, gamma_residual) = e.scaling_residuals();
            rec.emit_json(json!({
                "exponents": e,
                "scaling_residuals": [beta_residual, gamma_residual],
            }))
        }
    }
}

pub fn oracle(args: &OracleArgs) -> Result<()> {
    let rec = Recorder::new("oracle", args, vec![]);
    let net = Network::read_json(&args.file)?;
    let value = exact_classical_sc(&net)?;
    rec.emit_json(json!({
        "value": value,
        "theta": quarter_pi(value, RuleSystem::Classical)?,
        "edges": net.edge_count(),
    }))
}

pub fn scaling(args: &ScalingArgs) -> Result<()> {
    let rec = Recorder::new("scaling", args, vec![]);
    let curves: Vec<CutoffCurve> = serde_json::from_str(&std::fs::read_to_string(&args.file)?)?;
    rec.emit_json(fit_cutoff_scaling(&curves, args.prefactor, (args.lmin, args.lmax))?)
}
