//! `gridsite`: one binary for ACL checks, pool accounts, mapfiles, the grid
//! filesystem and the file server.
//!
//! Exit status: 0 success, 1 operational failure, 2 usage or parse error,
//! 3 when `eval` grants nothing.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "gridsite",
    version,
    about = "Grid authorization and file service toolkit"
)]
struct Cli {
    /// Site configuration file (key=value and mount lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    identity: IdentityArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct IdentityArgs {
    /// Caller's certificate subject, e.g. /C=UK/O=eScience/CN=Name.
    #[arg(long, global = true)]
    dn: Option<String>,
    /// VOMS attribute held by the caller. Repeatable.
    #[arg(long = "fqan", global = true)]
    fqans: Vec<String>,
    /// Act as an unauthenticated caller.
    #[arg(long, global = true, conflicts_with_all = ["dn", "fqans"])]
    anonymous: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the permissions an ACL file grants the caller.
    Eval { acl_file: PathBuf },
    /// Inspect and edit control files.
    #[command(subcommand)]
    Acl(AclCommand),
    /// Pool account allocation.
    Pool(PoolArgs),
    /// Build a grid-mapfile from static entries and VO member lists.
    #[command(subcommand)]
    Mapfile(MapfileCommand),
    /// Operate on the grid filesystem.
    Fs(FsArgs),
    /// Run the file server described by --config.
    Serve,
}

#[derive(Subcommand)]
enum AclCommand {
    /// Validate an ACL file and print its canonical form.
    Check { acl_file: PathBuf },
    /// Show the effective ACL for a path and the control file it comes from.
    Resolve {
        /// Path relative to the tree root.
        path: String,
        #[arg(long)]
        root: PathBuf,
    },
    /// Install an ACL file as the control file of a path.
    Set {
        path: String,
        acl_file: PathBuf,
        #[arg(long)]
        root: PathBuf,
        /// Write the per-file (`.gacl-<name>`) or per-directory (`.gacl`) control file.
        #[arg(long, value_enum)]
        scope: Option<Scope>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    File,
    Dir,
}

#[derive(Args)]
struct PoolArgs {
    #[arg(long, global = true)]
    state_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    prefix: Option<String>,
    #[arg(long, global = true)]
    capacity: Option<u32>,
    /// Grace period in seconds.
    #[arg(long, global = true)]
    grace: Option<u64>,
    /// Clock override in seconds since the epoch.
    #[arg(long, global = true)]
    now: Option<u64>,
    #[command(subcommand)]
    command: PoolCommand,
}

#[derive(Subcommand)]
enum PoolCommand {
    /// Bind a DN to an account (idempotent) and print the account.
    Allocate { dn: String },
    #[command(subcommand)]
    Lease(LeaseCommand),
    /// Free idle accounts past their grace period, one per line.
    Reclaim,
    /// List bindings: account, DN, active leases, release time.
    Status,
}

#[derive(Subcommand)]
enum LeaseCommand {
    /// Start a lease for a DN; prints `<lease-id> <account>`.
    Begin { dn: String },
    /// End a lease by id.
    End { lease_id: String },
}

#[derive(Subcommand)]
enum MapfileCommand {
    Build {
        /// File of `"<DN>" <account>` lines.
        #[arg(long = "static")]
        static_file: Option<PathBuf>,
        /// `<location>=<pool>`: members of a dn-list file or URL map to `.pool`. Repeatable.
        #[arg(long = "vo")]
        vo: Vec<String>,
    },
}

#[derive(Args)]
struct FsArgs {
    /// Extra mount, written as in the config file without the leading
    /// keyword: `<prefix> local <dir>` or `<prefix> http <url> [options]`.
    #[arg(long = "mount", global = true)]
    mounts: Vec<String>,
    #[command(subcommand)]
    command: FsCommand,
}

#[derive(Subcommand)]
enum FsCommand {
    Ls {
        path: String,
        /// Print JSON objects with name, kind, size and modified.
        #[arg(long)]
        json: bool,
    },
    Cat {
        path: String,
    },
    /// Store standard input, or a local file, at a path.
    Put {
        path: String,
        file: Option<PathBuf>,
    },
    Rm {
        path: String,
    },
    Mkdir {
        path: String,
    },
    Stat {
        path: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_env("GRIDSITE_LOG"))
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("gridsite: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
