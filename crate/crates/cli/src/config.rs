//! Key-value config files: one `key = value` pair per line, `#` comments,
//! dotted keys grouping related fields (`sim.n = 200`).

use std::collections::BTreeMap;

use snipcov_core::bench::{BenchScenario, Method, Metric};
use snipcov_core::fit::DnSelect;
use snipcov_core::sim::{CovSetting, Design, MeanFn, NoiseSpec, SimConfig};
use snipcov_core::{CorrFamily, CorrSpec, Error, PipelineConfig};

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::ParseError {
                line: idx + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigMap { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str, Error> {
        self.get(key)
            .ok_or_else(|| Error::InvalidSimConfig(format!("missing config key `{key}`")))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, Error> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidSimConfig(format!("invalid value `{v}` for `{key}`"))
            }),
        }
    }

    /// Builds the simulation scenario from `sim.*` keys.
    pub fn sim_config(&self, seed_override: Option<u64>) -> Result<SimConfig<f64>, Error> {
        let cov = match self.required("sim.setting")? {
            "I" | "i" | "1" => CovSetting::I,
            "II" | "ii" | "2" => CovSetting::II,
            "III" | "iii" | "3" => CovSetting::III,
            other => {
                return Err(Error::InvalidSimConfig(format!(
                    "unknown sim.setting `{other}` (expected I, II or III)"
                )))
            }
        };
        let mean = match self.get("sim.mean").unwrap_or("mu1") {
            "mu1" => MeanFn::Mu1,
            "mu2" => MeanFn::Mu2,
            "zero" => MeanFn::Zero,
            other => {
                return Err(Error::InvalidSimConfig(format!(
                    "unknown sim.mean `{other}`"
                )))
            }
        };
        let m: usize = self.parse_as("sim.m")?.unwrap_or(4);
        let design = match self.get("sim.design").unwrap_or("sparse") {
            "sparse" => Design::Sparse { mean_m: m },
            "sparse-fixed" => Design::SparseFixed { m },
            "dense" => Design::Dense { m },
            other => {
                return Err(Error::InvalidSimConfig(format!(
                    "unknown sim.design `{other}`"
                )))
            }
        };
        let noise = match (
            self.parse_as::<f64>("sim.sigma0_sq")?,
            self.parse_as::<f64>("sim.snr")?,
        ) {
            (Some(v), None) => NoiseSpec::Sigma0Sq(v),
            (None, Some(r)) => NoiseSpec::Snr(r),
            (None, None) => NoiseSpec::Sigma0Sq(0.0),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidSimConfig(
                    "set either sim.sigma0_sq or sim.snr, not both".into(),
                ))
            }
        };
        Ok(SimConfig {
            cov,
            mean,
            design,
            n: self.parse_as("sim.n")?.unwrap_or(200),
            delta: self.parse_as("sim.delta")?.unwrap_or(0.25),
            noise,
            seed: seed_override
                .or(self.parse_as("sim.seed")?)
                .unwrap_or(0),
        })
    }

    pub fn methods(&self) -> Result<Vec<Method>, Error> {
        let raw = self.get("bench.methods").unwrap_or("snpt-noise");
        raw.split(',')
            .map(|m| match m.trim() {
                "snpt-noise" => Ok(Method::SnptNoise),
                "snptm" => Ok(Method::Snptm),
                "snptf" => Ok(Method::Snptf),
                other => Err(Error::InvalidSimConfig(format!(
                    "unknown method `{other}`"
                ))),
            })
            .collect()
    }

    pub fn metrics(&self) -> Result<Vec<Metric>, Error> {
        let raw = self.get("bench.metrics").unwrap_or("rmse_sigma0");
        raw.split(',')
            .map(|m| match m.trim() {
                "rmse_sigma0" => Ok(Metric::RmseSigma0),
                "rmise_var" => Ok(Metric::RmiseVar),
                "rmise_cov" => Ok(Metric::RmiseCov),
                other => Err(Error::InvalidSimConfig(format!(
                    "unknown metric `{other}`"
                ))),
            })
            .collect()
    }

    pub fn dn_method(&self) -> Result<DnSelect, Error> {
        match self.get("fit.dn_method").unwrap_or("cv5") {
            "cv5" => Ok(DnSelect::Cv5),
            "aic" => Ok(DnSelect::Aic),
            other => Err(Error::InvalidSimConfig(format!(
                "unknown fit.dn_method `{other}`"
            ))),
        }
    }

    pub fn dn_candidates(&self) -> Result<Vec<usize>, Error> {
        match self.get("fit.dn_candidates") {
            None => Ok(vec![1, 2, 3, 4, 5]),
            Some(raw) => raw
                .split(',')
                .map(|v| {
                    v.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidSimConfig(format!("invalid dimension `{v}`"))
                    })
                })
                .collect(),
        }
    }

    /// Builds the benchmark scenario from `sim.*`, `bench.*` and `fit.*`.
    pub fn bench_scenario(&self, seed_override: Option<u64>) -> Result<BenchScenario<f64>, Error> {
        let sim = self.sim_config(None)?;
        let seed = seed_override
            .or(self.parse_as("bench.seed")?)
            .unwrap_or(sim.seed);
        let mut scenario = BenchScenario::new(sim, self.parse_as("bench.replicates")?.unwrap_or(100), seed);
        scenario.methods = self.methods()?;
        scenario.metrics = self.metrics()?;
        scenario.grid_len = self.parse_as("bench.grid_len")?.unwrap_or(51);
        scenario.dn_candidates = self.dn_candidates()?;
        scenario.dn_method = self.dn_method()?;
        Ok(scenario)
    }

    /// Correlation family choice from `fit.*` keys.
    pub fn corr_spec(&self) -> Result<CorrSpec<f64>, Error> {
        match self.get("fit.family").unwrap_or("matern") {
            "matern" => Ok(CorrSpec::Family(CorrFamily::Matern)),
            "powerexp" => Ok(CorrSpec::Family(CorrFamily::PowerExp)),
            "rationalquad" => Ok(CorrSpec::Family(CorrFamily::RationalQuad)),
            "fourier" => {
                if let Some(dn) = self.parse_as::<usize>("fit.dn")? {
                    Ok(CorrSpec::Family(CorrFamily::fourier(dn)))
                } else {
                    Ok(CorrSpec::FourierSelect {
                        candidates: self.dn_candidates()?,
                        method: self.dn_method()?,
                    })
                }
            }
            other => Err(Error::InvalidSimConfig(format!(
                "unknown fit.family `{other}`"
            ))),
        }
    }

    pub fn pipeline(&self, seed: u64) -> Result<PipelineConfig<f64>, Error> {
        Ok(PipelineConfig {
            correlation: self.corr_spec()?,
            h0: self.parse_as("estimate.h0")?,
            ridged_noise: self.parse_as("estimate.ridged_noise")?.unwrap_or(false),
            seed,
            ..PipelineConfig::default()
        })
    }

    /// Calibration settings: `calibrate.settings` is a comma-separated list
    /// of `setting/n/m/delta/sigma0_sq` tuples.
    pub fn calibration_settings(&self) -> Result<Vec<SimConfig<f64>>, Error> {
        let raw = self.required("calibrate.settings")?;
        let mut out = Vec::new();
        for tuple in raw.split(',') {
            let parts: Vec<&str> = tuple.trim().split('/').collect();
            if parts.len() != 5 {
                return Err(Error::InvalidSimConfig(format!(
                    "calibration tuple `{tuple}` must be setting/n/m/delta/sigma0_sq"
                )));
            }
            let cov = match parts[0] {
                "I" => CovSetting::I,
                "II" => CovSetting::II,
                "III" => CovSetting::III,
                other => {
                    return Err(Error::InvalidSimConfig(format!(
                        "unknown setting `{other}`"
                    )))
                }
            };
            let parse_num = |v: &str| -> Result<f64, Error> {
                v.parse()
                    .map_err(|_| Error::InvalidSimConfig(format!("invalid number `{v}`")))
            };
            out.push(SimConfig {
                cov,
                mean: MeanFn::Zero,
                design: Design::SparseFixed {
                    m: parse_num(parts[2])? as usize,
                },
                n: parse_num(parts[1])? as usize,
                delta: parse_num(parts[3])?,
                noise: NoiseSpec::Sigma0Sq(parse_num(parts[4])?),
                seed: 0,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_config() {
        let text = "\
# scenario
sim.setting = I
sim.n = 50
sim.delta = 0.25
sim.snr = 2
bench.replicates = 7
bench.methods = snptm
bench.metrics = rmise_var,rmise_cov
";
        let cfg = ConfigMap::parse(text).unwrap();
        let sc = cfg.bench_scenario(Some(5)).unwrap();
        assert_eq!(sc.replicates, 7);
        assert_eq!(sc.seed, 5);
        assert_eq!(sc.sim.n, 50);
        assert_eq!(sc.methods, vec![Method::Snptm]);
        assert_eq!(sc.metrics, vec![Metric::RmiseVar, Metric::RmiseCov]);
    }

    #[test]
    fn rejects_malformed_lines_and_values() {
        assert!(ConfigMap::parse("sim.setting I").is_err());
        let cfg = ConfigMap::parse("sim.setting = IV").unwrap();
        assert!(cfg.sim_config(None).is_err());
        let cfg = ConfigMap::parse("sim.setting = I\nsim.n = many").unwrap();
        assert!(cfg.sim_config(None).is_err());
    }

    #[test]
    fn calibration_tuples() {
        let cfg =
            ConfigMap::parse("calibrate.settings = I/50/4/0.25/0.1, III/200/5/0.25/0\n").unwrap();
        let settings = cfg.calibration_settings().unwrap();
        assert_eq!(settings.len(), 2);
        assert_eq!(settings[0].n, 50);
        assert!(matches!(settings[1].design, Design::SparseFixed { m: 5 }));
    }
}
