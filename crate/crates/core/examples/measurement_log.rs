//! Record a plug's measurement log and export it as JSONL and CSV.

use voltplug::host::cli::record_log;
use voltplug::host::presets;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = presets::preset("switched").expect("bundled preset");
    let log = record_log(scenario, 300_000, false)?;
    println!("{} records", log.len());

    let mut jsonl = Vec::new();
    log.write_jsonl(&mut jsonl)?;
    print!("{}", String::from_utf8(jsonl)?.lines().next().unwrap_or_default());
    println!();

    let mut csv = Vec::new();
    log.write_csv(&mut csv)?;
    for line in String::from_utf8(csv)?.lines().take(3) {
        println!("{line}");
    }
    Ok(())
}
