use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("SVCTX_THREADS").ok().and_then(|v| v.parse().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: SVCTX_THREADS ignored: {e}");
        }
    }
    let code = svctx::cli::run(std::env::args_os(), &mut std::io::stdout());
    ExitCode::from(code as u8)
}
