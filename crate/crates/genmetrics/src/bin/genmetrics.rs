fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(genmetrics::cli::run(&argv));
}
