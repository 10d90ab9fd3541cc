use std::io;

fn main() {
    let code = carpet_spectra_cli::run(std::env::args_os(), &mut io::stdout().lock(), &mut io::stderr().lock());
    std::process::exit(code);
}
