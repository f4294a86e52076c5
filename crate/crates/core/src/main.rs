fn main() {
    std::process::exit(curveflow::cli::main());
}
