use std::process::Command;

/// Stamp the binary with a git-describe build id so every run record names
/// the exact tree it came from; falls back when git is unavailable.
fn main() {
    let id = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .map(|out| String::from_utf8_lossy(&out.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "untracked".to_string());
    println!("cargo:rustc-env=BUILD_ID={id}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
