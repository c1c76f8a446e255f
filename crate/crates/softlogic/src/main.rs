fn main() {
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr();
    let code = softlogic::cli::run(std::env::args_os(), &mut out, &mut err);
    drop(out);
    std::process::exit(code);
}
