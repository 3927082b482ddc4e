fn main() {
    std::process::exit(bvn_prior::cli::main());
}
