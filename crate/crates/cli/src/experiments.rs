//! Subcommand implementations: each one runs a piece of the laboratory
//! and leaves CSV (and optionally SVG) artifacts plus a report entry.

use crate::artifacts::{cell, emit_plot, write_csv, PlotKind, Series};
use crate::config::ExperimentConfig;
use crate::CliError;
use hetheat_core::sampler::NoiseGridOracle;
use hetheat_core::*;
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

pub struct Runner {
    pub config: ExperimentConfig,
    pub run_id: String,
    pub dir: PathBuf,
    pub kernel: PiecewiseKernel,
    pub spec: QuadratureSpec,
    pub cache: GramCache,
    pub timings: Vec<(String, f64)>,
    pub summaries: serde_json::Map<String, serde_json::Value>,
}

impl Runner {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let medium = config.medium().expect("validated");
        let run_id = config.run_id();
        let dir = config.run_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        let spec = config.quadrature_spec();
        let cache = GramCache::new(&config.cache_dir);
        Ok(Runner {
            kernel: PiecewiseKernel::new(medium),
            run_id,
            dir,
            spec,
            cache,
            config,
            timings: Vec::new(),
            summaries: serde_json::Map::new(),
        })
    }

    fn csv(&self, name: &str, header: &str, rows: &[Vec<String>]) -> Result<(), CliError> {
        write_csv(
            &self.dir.join(name),
            &self.run_id,
            self.config.seed,
            header,
            rows,
        )
    }

    fn timed<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T, CliError>,
    ) -> Result<T, CliError> {
        let t0 = Instant::now();
        let out = f(self)?;
        self.timings
            .push((name.to_string(), t0.elapsed().as_secs_f64()));
        Ok(out)
    }

    pub fn kernel_table(&mut self) -> Result<(), CliError> {
        self.timed("kernel-table", |r| {
            let u = r.config.kernel_u;
            let x = r.config.kernel_x;
            let grid = r.config.parse_z_range()?;
            let mut rows = Vec::with_capacity(grid.len());
            for &z in &grid {
                let g = r.kernel.green(u, x, z).map_err(numeric("kernel", "green"))?;
                let em = r.kernel.e_minus(u, x, z).map_err(numeric("kernel", "e_minus"))?;
                let ep = r.kernel.e_plus(u, x, z).map_err(numeric("kernel", "e_plus"))?;
                rows.push(vec![cell(z), cell(g), cell(em), cell(ep)]);
            }
            r.csv("kernel_table.csv", "z,green,e_minus,e_plus", &rows)?;

            // Diagnostics, printed but not asserted: the kernel generally
            // jumps at the interface, and the density-weighted kernel is
            // observed to be symmetric in (x, z).
            let below = r.kernel.green(u, x, -1e-12).map_err(numeric("kernel", "green"))?;
            let above = r.kernel.green(u, x, 1e-12).map_err(numeric("kernel", "green"))?;
            let jump_ratio = above / below;
            let m = r.kernel.medium();
            let rho = |z: f64| if z <= 0.0 { m.rho1() } else { m.rho2() };
            let mut balance_residual: f64 = 0.0;
            for &z in grid.iter().filter(|&&z| z != x) {
                let fwd = rho(x) * r.kernel.green(u, x, z).map_err(numeric("kernel", "green"))?;
                let bwd = rho(z) * r.kernel.green(u, z, x).map_err(numeric("kernel", "green"))?;
                if fwd.max(bwd) > 1e-300 {
                    balance_residual = balance_residual.max((fwd - bwd).abs() / fwd.max(bwd));
                }
            }
            println!(
                "kernel-table: interface jump G(0+)/G(0-) = {jump_ratio:.6}, \
                 detailed-balance residual max |rho(x)G(u,x,z) - rho(z)G(u,z,x)| (rel) = {balance_residual:.2e}"
            );
            r.summaries.insert(
                "kernel_table".into(),
                json!({
                    "rows": rows.len(),
                    "u": u,
                    "x": x,
                    "interface_jump_ratio": jump_ratio,
                    "detailed_balance_residual": balance_residual,
                }),
            );
            Ok(())
        })
    }

    pub fn conditions(&mut self) -> Result<(), CliError> {
        self.timed("conditions", |r| {
            let h_grid: Vec<f64> = (3..=11).map(|m| 0.5f64.powi(m)).collect();
            let mut rows = Vec::new();
            let mut pass_all = true;
            for cond in [ConditionId::H1, ConditionId::H2, ConditionId::H3] {
                let rep = verify_condition(&r.kernel, r.config.t, cond, &h_grid, &r.spec)
                    .map_err(numeric("covariance", "verify_condition"))?;
                pass_all &= rep.pass;
                rows.push(vec![
                    cond.to_string(),
                    cell(rep.fitted_constant),
                    cell(rep.worst_ratio),
                    cell(rep.slope),
                    rep.pass.to_string(),
                    rep.degenerate.to_string(),
                ]);
            }
            r.csv(
                "conditions.csv",
                "condition,fitted_constant,worst_ratio,slope,pass,degenerate",
                &rows,
            )?;

            let est = holder_estimate(&r.kernel, r.config.t, &h_grid, &r.spec)
                .map_err(numeric("quadvar", "holder_estimate"))?;
            let vrows: Vec<Vec<String>> = est
                .points
                .iter()
                .map(|p| vec![cell(p.h), cell(p.mean_variance)])
                .collect();
            r.csv("variogram.csv", "h,mean_increment_variance", &vrows)?;
            if r.config.emit_svg {
                emit_plot(
                    &[Series {
                        label: "variogram",
                        points: est.points.iter().map(|p| (p.h, p.mean_variance)).collect(),
                    }],
                    PlotKind::LogLog,
                    "increment variance vs lag",
                    "h",
                    "E (u(t,x+h)-u(t,x))^2",
                    &r.run_id,
                    &r.dir.join("variogram.svg"),
                )?;
            }
            r.summaries.insert(
                "conditions".into(),
                json!({"pass": pass_all, "variogram_slope": est.slope, "gamma_hat": est.gamma_hat}),
            );
            Ok(())
        })
    }

    pub fn covariance(&mut self) -> Result<(), CliError> {
        self.timed("covariance", |r| {
            let mut rows = Vec::new();
            for &n in &r.config.n_list {
                let gram = build_gram(&r.kernel, r.config.t, n, &r.spec, Some(&r.cache))
                    .map_err(numeric("covariance", "build_gram"))?;
                let m = expected_vsq(&gram);
                let corr = gram.correlation();
                let mut max_off: f64 = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            max_off = max_off.max(corr[(j, k)].abs());
                        }
                    }
                }
                rows.push(vec![
                    n.to_string(),
                    cell(gram.trace()),
                    cell(gram.variances()[0]),
                    cell(gram.variances()[n / 2]),
                    cell(max_off),
                    cell(m.t2),
                    cell(m.e_vsq),
                ]);
            }
            r.csv(
                "covariance.csv",
                "n,trace,sigma2_first,sigma2_mid,max_abs_correlation,t2,e_vsq",
                &rows,
            )?;

            let t = r.config.t;
            let t_grid = [0.25 * t, 0.5 * t, 0.75 * t, t];
            let x_grid = [0.0, 0.25, 0.5, 1.0];
            let sup = sup_variance_check(&r.kernel, &t_grid, &x_grid, &r.spec)
                .map_err(numeric("covariance", "sup_variance_check"))?;
            let srows = vec![vec![
                cell(sup.max_second_moment),
                cell(sup.fitted_c4),
                cell(sup.t_horizon),
            ]];
            r.csv(
                "sup_variance.csv",
                "max_second_moment,fitted_c4,t_horizon",
                &srows,
            )?;
            r.summaries.insert(
                "covariance".into(),
                json!({"grids": r.config.n_list, "max_second_moment": sup.max_second_moment}),
            );
            Ok(())
        })
    }

    pub fn sample(&mut self) -> Result<(), CliError> {
        self.timed("sample", |r| {
            let n = *r.config.n_list.last().expect("validated nonempty");
            let gram = build_gram(&r.kernel, r.config.t, n, &r.spec, Some(&r.cache))
                .map_err(numeric("covariance", "build_gram"))?;
            let rows_wanted = r.config.sample_rows;
            let samples = cholesky_sample(&gram, r.config.seed, rows_wanted)
                .map_err(numeric("sampler", "cholesky_sample"))?;
            let mut header = String::from("replica_id");
            for j in 0..n {
                header.push_str(&format!(",d{j}"));
            }
            let rows: Vec<Vec<String>> = samples
                .iter()
                .map(|s| {
                    let mut row = vec![s.replica_id.to_string()];
                    row.extend(s.increments.iter().map(|&v| cell(v)));
                    row
                })
                .collect();
            r.csv("samples.csv", &header, &rows)?;
            r.summaries
                .insert("sample".into(), json!({"n": n, "replicas": rows_wanted}));
            Ok(())
        })
    }

    pub fn clt(&mut self) -> Result<(), CliError> {
        self.timed("clt", |r| {
            let report = clt_experiment(
                &r.kernel,
                r.config.t,
                &r.config.n_list,
                r.config.m_replicas,
                r.config.seed,
                &r.spec,
                Some(&r.cache),
            )
            .map_err(numeric("quadvar", "clt_experiment"))?;
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|row| {
                    vec![
                        row.n.to_string(),
                        row.m.to_string(),
                        cell(row.ks),
                        cell(row.be_bound),
                        cell(row.e_vsq),
                    ]
                })
                .collect();
            r.csv("clt.csv", "n,m,ks,be_bound,e_vsq", &rows)?;
            if r.config.emit_svg {
                emit_plot(
                    &[
                        Series {
                            label: "empirical KS",
                            points: report
                                .rows
                                .iter()
                                .map(|row| (row.n as f64, row.ks))
                                .collect(),
                        },
                        Series {
                            label: "exact bound value",
                            points: report
                                .rows
                                .iter()
                                .map(|row| (row.n as f64, row.be_bound))
                                .collect(),
                        },
                    ],
                    PlotKind::LogLog,
                    "normal approximation rate",
                    "N",
                    "distance",
                    &r.run_id,
                    &r.dir.join("clt.svg"),
                )?;
            }
            r.summaries.insert(
                "clt".into(),
                json!({"ks_slope": report.ks_slope, "be_slope": report.be_slope}),
            );
            Ok(())
        })
    }

    pub fn asclt(&mut self) -> Result<(), CliError> {
        self.timed("asclt", |r| {
            let fns = TestFunction::shipped();
            let report = asclt_experiment(
                &r.kernel,
                r.config.t,
                r.config.dyadic_level,
                &fns,
                r.config.n_paths,
                r.config.seed,
                &r.spec,
                Some(&r.cache),
            )
            .map_err(numeric("quadvar", "asclt_experiment"))?;

            let trows: Vec<Vec<String>> = report
                .function_names
                .iter()
                .zip(&report.targets)
                .map(|(name, &t)| vec![name.to_string(), cell(t)])
                .collect();
            r.csv("asclt_targets.csv", "function,gaussian_expectation", &trows)?;

            let mut header = String::from("path,k,n,v_tilde");
            for name in &report.function_names {
                header.push_str(&format!(",avg_{name}"));
            }
            let mut rows = Vec::new();
            for path in &report.paths {
                for (ki, &v) in path.v_tilde.iter().enumerate() {
                    let mut row = vec![
                        path.path_id.to_string(),
                        (ki + 1).to_string(),
                        (1usize << (ki + 1)).to_string(),
                        cell(v),
                    ];
                    for avgs in &path.averages {
                        row.push(cell(avgs[ki]));
                    }
                    rows.push(row);
                }
            }
            r.csv("asclt.csv", &header, &rows)?;

            if r.config.emit_svg {
                let series: Vec<Series> = report
                    .paths
                    .iter()
                    .map(|p| Series {
                        label: "path",
                        points: p.averages[0]
                            .iter()
                            .enumerate()
                            .map(|(ki, &a)| ((ki + 1) as f64, a))
                            .collect(),
                    })
                    .collect();
                emit_plot(
                    &series,
                    PlotKind::Line,
                    "running lacunary averages of cos",
                    "K",
                    "A_K(cos)",
                    &r.run_id,
                    &r.dir.join("asclt_cos.svg"),
                )?;
            }
            r.summaries.insert(
                "asclt".into(),
                json!({"level": report.level, "paths": report.paths.len(), "lacunary": report.lacunary}),
            );
            Ok(())
        })
    }

    pub fn diagnostics(&mut self) -> Result<(), CliError> {
        self.timed("diagnostics", |r| {
            let mut rows = Vec::new();
            for &n in &r.config.n_list {
                let gram = build_gram(&r.kernel, r.config.t, n, &r.spec, Some(&r.cache))
                    .map_err(numeric("covariance", "build_gram"))?;
                let d = chaos_diag(&gram);
                rows.push(vec![
                    n.to_string(),
                    cell(d.e_vsq),
                    cell(d.t1_over_2n),
                    cell(d.t2_over_2n),
                    cell(d.d_var),
                    cell(d.d4),
                    cell(d.d3),
                    cell(d.d2),
                    cell(d.d1),
                    cell(d.contraction_sq),
                    cell(d.be_bound),
                ]);
            }
            r.csv(
                "diagnostics.csv",
                "n,e_vsq,t1_over_2n,t2_over_2n,d_var,d4,d3,d2,d1,contraction_sq,be_bound",
                &rows,
            )?;

            // Hypothesis sums from a dyadic Gram; level capped so the fine
            // grid stays at desk scale.
            let level = r.config.dyadic_level.min(9);
            let fine = build_gram(
                &r.kernel,
                r.config.t,
                1usize << level,
                &r.spec,
                Some(&r.cache),
            )
            .map_err(numeric("covariance", "build_gram"))?;
            let hyp = asclt_hypotheses(&fine);
            let lrows: Vec<Vec<String>> = hyp
                .levels
                .iter()
                .map(|l| vec![l.l.to_string(), cell(l.contraction_sq), cell(l.scaled)])
                .collect();
            r.csv(
                "hypotheses_levels.csv",
                "l,contraction_sq,l_times_contraction_sq",
                &lrows,
            )?;
            let mut srows = Vec::new();
            for (n, v) in &hyp.condition3_partials {
                srows.push(vec!["3".into(), n.to_string(), cell(*v)]);
            }
            for (n, v) in &hyp.condition4_partials {
                srows.push(vec!["4".into(), n.to_string(), cell(*v)]);
            }
            r.csv("hypotheses_sums.csv", "condition,n,partial_sum", &srows)?;

            if r.config.emit_svg {
                emit_plot(
                    &[Series {
                        label: "be",
                        points: rows
                            .iter()
                            .map(|row| {
                                (
                                    row[0].parse::<f64>().unwrap(),
                                    row[10].parse::<f64>().unwrap(),
                                )
                            })
                            .collect(),
                    }],
                    PlotKind::LogLog,
                    "Berry-Esseen bound value",
                    "N",
                    "bound",
                    &r.run_id,
                    &r.dir.join("be_bound.svg"),
                )?;
            }
            r.summaries
                .insert("diagnostics".into(), json!({"levels": level}));
            Ok(())
        })
    }

    /// Cross-validate the sampler against the noise-grid oracle (the
    /// `all` pipeline runs this as its final consistency step).
    pub fn oracle_check(&mut self) -> Result<(), CliError> {
        self.timed("oracle-check", |r| {
            let n = *r.config.n_list.first().expect("validated nonempty");
            let gram = build_gram(&r.kernel, r.config.t, n, &r.spec, Some(&r.cache))
                .map_err(numeric("covariance", "build_gram"))?;
            let m_chol = r.config.m_replicas.max(10_000);
            let samples = cholesky_sample(&gram, r.config.seed, m_chol)
                .map_err(numeric("sampler", "cholesky_sample"))?;
            let x_grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let oracle = NoiseGridOracle::new(
                &r.kernel,
                r.config.t,
                &x_grid,
                r.config.oracle_ds,
                r.config.oracle_dy,
                r.config.oracle_half_width,
            );
            let m_orc = r.config.oracle_replicas;
            let orc_var = oracle.mean_square_increments(r.config.seed ^ 0x6f72_6163, m_orc);
            let mut rows = Vec::new();
            let mut worst_z = 0.0f64;
            for (j, &orc) in orc_var.iter().enumerate() {
                let chol = samples
                    .iter()
                    .map(|s| s.increments[j] * s.increments[j])
                    .sum::<f64>()
                    / m_chol as f64;
                let se =
                    ((2.0 * chol * chol) / m_chol as f64 + (2.0 * orc * orc) / m_orc as f64).sqrt();
                let z = (chol - orc) / se;
                worst_z = worst_z.max(z.abs());
                rows.push(vec![
                    j.to_string(),
                    cell(gram.entry(j, j)),
                    cell(chol),
                    cell(orc),
                    cell(z),
                ]);
            }
            r.csv(
                "oracle_check.csv",
                "j,gram_variance,cholesky_mc,noise_grid_mc,z",
                &rows,
            )?;
            r.summaries.insert(
                "oracle_check".into(),
                json!({"worst_abs_z": worst_z, "n": n}),
            );
            Ok(())
        })
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let stats = self.cache.stats();
        let echo = serde_json::to_value(&self.config).expect("config serializes");
        let report = json!({
            "run_id": self.run_id,
            "config": echo,
            "seed": self.config.seed,
            "timings_seconds": self.timings.iter().map(|(k, v)| json!({"step": k, "seconds": v})).collect::<Vec<_>>(),
            "cache": {"hits": stats.hits, "misses": stats.misses, "dir": self.config.cache_dir},
            "results": serde_json::Value::Object(std::mem::take(&mut self.summaries)),
        });
        let path = self.dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report).unwrap()).map_err(|e| {
            CliError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            }
        })?;
        // config echo for exact reruns
        let cfg_path = self.dir.join("config.json");
        std::fs::write(
            &cfg_path,
            serde_json::to_string_pretty(&self.config).unwrap(),
        )
        .map_err(|e| CliError::Io {
            path: cfg_path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(self.dir)
    }
}

fn numeric<E: std::fmt::Display>(module: &'static str, op: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError::Numeric {
        module,
        op,
        message: e.to_string(),
    }
}
