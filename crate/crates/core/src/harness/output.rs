use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use super::config::ExperimentConfig;
use super::runner::ExperimentOutput;
use super::search::MinModelsReport;
use crate::error::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "ENSSAMP_OUT_DIR";

/// 17 significant digits, round-trip exact.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", dir.display()))))?;
    let probe = dir.join(".write-probe");
    File::create(&probe)
        .and_then(|mut f| f.write_all(b"ok"))
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{} is not writable: {e}", dir.display()))))?;
    fs::remove_file(probe)?;
    Ok(())
}

pub fn write_traces_csv(w: &mut impl Write, result: &ExperimentOutput) -> Result<()> {
    writeln!(w, "agent,realization,t,regret")?;
    for agent in &result.agents {
        for trace in &agent.traces {
            for (t, r) in trace.regret.iter().enumerate() {
                writeln!(w, "{},{},{},{}", agent.label, trace.realization, t, format_float(*r))?;
            }
        }
    }
    Ok(())
}

pub fn write_summary_csv(w: &mut impl Write, result: &ExperimentOutput) -> Result<()> {
    writeln!(w, "agent,t,mean_regret,stderr")?;
    for agent in &result.agents {
        let s = &agent.summary;
        for (t, (m, se)) in s.per_period_mean.iter().zip(&s.per_period_stderr).enumerate() {
            writeln!(w, "{},{},{},{}", agent.label, t, format_float(*m), format_float(*se))?;
        }
    }
    Ok(())
}

pub fn write_min_models_csv(w: &mut impl Write, report: &MinModelsReport) -> Result<()> {
    writeln!(w, "models,mean_regret,stderr,ts_mean_regret,ts_stderr,excess,excess_stderr,qualifies")?;
    for row in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.models,
            format_float(row.es.mean),
            format_float(row.es.stderr),
            format_float(report.ts.mean),
            format_float(report.ts.stderr),
            format_float(row.excess),
            format_float(row.excess_stderr),
            row.qualifies
        )?;
    }
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

const REGRET_NOTE: &str = "regret is the mean-reward shortfall R* - mean_reward(A_t) under the realization's drawn parameters";

pub(crate) fn write_experiment(dir: &Path, config: &ExperimentConfig, result: &ExperimentOutput) -> Result<()> {
    write_file(&dir.join("summary.csv"), |w| write_summary_csv(w, result))?;
    if config.run.write_traces {
        write_file(&dir.join("traces.csv"), |w| write_traces_csv(w, result))?;
    }
    let meta = json!({
        "regret": REGRET_NOTE,
        "stderr": "sample standard deviation over sqrt(realizations); 0 for a single realization",
        "config": config,
        "agents": result.agents.iter().map(|a| json!({
            "label": a.label,
            "cumulative_mean_regret": a.summary.cumulative_mean,
            "realizations": a.summary.realizations,
        })).collect::<Vec<_>>(),
    });
    write_file(&dir.join("run.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &meta).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}

pub(crate) fn write_search(dir: &Path, config: &ExperimentConfig, report: &MinModelsReport) -> Result<()> {
    write_file(&dir.join("min_models.csv"), |w| write_min_models_csv(w, report))?;
    let meta = json!({
        "regret": REGRET_NOTE,
        "estimator": report.estimator_description(),
        "eps_target": report.eps_target,
        "minimal_models": report.minimal,
        "config": config,
    });
    write_file(&dir.join("min_models.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &meta).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}
