use std::io;

fn main() {
    let mut out = io::stdout().lock();
    let mut err = io::stderr().lock();
    let code = debriefkit_cli::run(std::env::args_os(), &mut debriefkit_cli::Io { out: &mut out, err: &mut err });
    std::process::exit(code);
}
