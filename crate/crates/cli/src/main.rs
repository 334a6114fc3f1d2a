fn main() {
    std::process::exit(pathcalc::run(std::env::args_os()));
}
