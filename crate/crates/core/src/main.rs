fn main() {
    // deterministic dense kernels
    faer::set_global_parallelism(faer::Par::Seq);
    std::process::exit(antidot::cli::main_with_args(std::env::args_os()));
}
