//! Driving the command-line front end without spawning a process.

fn main() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/two_vertex.json");
    for cmd in ["lambda", "nielsen", "classify"] {
        let out = ttk::cli::run(["ttk", cmd, fixture]);
        print!("$ ttk {cmd} two_vertex.json\n{}", out.stdout);
        eprint!("{}", out.stderr);
    }
}
