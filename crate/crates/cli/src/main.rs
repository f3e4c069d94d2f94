use clap::Parser;

fn main() {
    let cfg = match dualcr_cli::RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; everything else is a
            // usage error, kept apart from the "rejected" code 2.
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    std::process::exit(dualcr_cli::run(&cfg));
}
