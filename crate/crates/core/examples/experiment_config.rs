//! Build an experiment config in code, print it as JSON, and read it back.
//! The output is a valid `--config` file for the `slowfast` binary.
//!
//! cargo run --release --example experiment_config -- [D1|D2|OU|cubic]

use stable_averaging::cli::config::{ExperimentConfig, SystemSpec};

fn main() -> stable_averaging::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "D1".into());
    let cfg = ExperimentConfig { master_seed: 42, system: Some(SystemSpec::builtin(&name)), ..Default::default() };
    cfg.system.as_ref().expect("set above").build()?;
    let text = cfg.to_json()?;
    assert_eq!(ExperimentConfig::from_json(&text)?, cfg);
    println!("{text}");
    Ok(())
}
