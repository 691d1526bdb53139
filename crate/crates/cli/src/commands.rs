use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use gridsite_core::gacl::{
    acl_for_path, dir_control_path, evaluate, file_control_path, parse_acl, serialize_acl, validate_dn,
    validate_fqan, FsDnLists,
};
use gridsite_core::mapfile::{build_mapfile, parse_mapfile, VoSource};
use gridsite_core::pool::{Pool, PoolConfig, PoolError};
use gridsite_core::{Acl, CredentialSet};
use gridsite_server::SiteConfig;
use gridsite_vfs::local::atomic_write;
use gridsite_vfs::{build_table, DnListFetcher, FileKind, HttpOptions, MountSpec, MountTable, VfsError};

use crate::{
    AclCommand, Cli, Command, FsArgs, FsCommand, IdentityArgs, LeaseCommand, MapfileCommand, PoolArgs,
    PoolCommand, Scope,
};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn failed(message: impl ToString) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

type Outcome = Result<u8, Failure>;

pub fn run(cli: Cli) -> Outcome {
    let config = match &cli.config {
        Some(p) => Some(SiteConfig::load(p).map_err(|e| usage(e.to_string()))?),
        None => None,
    };
    let who = identity(&cli.identity)?;
    match cli.command {
        Command::Eval { acl_file } => eval(&acl_file, &who),
        Command::Acl(cmd) => acl(cmd, &who),
        Command::Pool(args) => pool(args, config.as_ref()),
        Command::Mapfile(cmd) => mapfile(cmd),
        Command::Fs(args) => filesystem(args, config.as_ref(), &who),
        Command::Serve => serve(config),
    }
}

fn identity(args: &IdentityArgs) -> Result<CredentialSet, Failure> {
    if args.anonymous || (args.dn.is_none() && args.fqans.is_empty()) {
        return Ok(CredentialSet::anonymous());
    }
    if let Some(dn) = &args.dn {
        validate_dn(dn).map_err(|e| usage(format!("--dn: {e}")))?;
    }
    for f in &args.fqans {
        validate_fqan(f).map_err(|e| usage(format!("--fqan: {e}")))?;
    }
    CredentialSet::from_parts(args.dn.clone(), args.fqans.clone(), true).map_err(|e| usage(e.to_string()))
}

fn dn_lists(root: Option<&Path>) -> Result<DnListFetcher, Failure> {
    let files = match root {
        Some(r) => FsDnLists::rooted(r),
        None => FsDnLists::new(),
    };
    DnListFetcher::new(&HttpOptions::default(), files).map_err(failed)
}

fn read_acl(path: &Path) -> Result<Acl, Failure> {
    let text = fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    parse_acl(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn out(bytes: &[u8]) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(bytes)
        .and_then(|()| stdout.flush())
        .map_err(failed)
}

fn eval(acl_file: &Path, who: &CredentialSet) -> Outcome {
    let acl = read_acl(acl_file)?;
    let granted = evaluate(&acl, who, &dn_lists(None)?);
    out(format!("{granted}\n").as_bytes())?;
    Ok(if granted.is_empty() { 3 } else { 0 })
}

fn acl(cmd: AclCommand, _who: &CredentialSet) -> Outcome {
    match cmd {
        AclCommand::Check { acl_file } => {
            let acl = read_acl(&acl_file)?;
            out(serialize_acl(&acl).as_bytes())?;
        }
        AclCommand::Resolve { path, root } => {
            let resolved = acl_for_path(&root, Path::new(&path), &Acl::deny_all()).map_err(failed)?;
            out(format!("source: {}\n{}", resolved.source, serialize_acl(&resolved.acl)).as_bytes())?;
        }
        AclCommand::Set {
            path,
            acl_file,
            root,
            scope,
        } => {
            let acl = read_acl(&acl_file)?;
            let target = root.join(&path);
            let scope = scope.unwrap_or(if path.trim_matches('/').is_empty() || target.is_dir() {
                Scope::Dir
            } else {
                Scope::File
            });
            let rel = Path::new(path.trim_start_matches('/'));
            let control = match scope {
                Scope::Dir => dir_control_path(rel),
                Scope::File => {
                    file_control_path(rel).ok_or_else(|| usage("--scope file needs a file path"))?
                }
            };
            let dest = root.join(control);
            atomic_write(&dest, serialize_acl(&acl).as_bytes())
                .map_err(|e| failed(format!("{}: {e}", dest.display())))?;
        }
    }
    Ok(0)
}

fn now_or(flag: Option<u64>) -> u64 {
    flag.unwrap_or_else(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    })
}

fn pool_config(args: &PoolArgs, config: Option<&SiteConfig>) -> Result<PoolConfig, Failure> {
    let base = config.and_then(|c| c.pool.clone());
    let state_dir = args
        .state_dir
        .clone()
        .or_else(|| base.as_ref().map(|b| b.state_dir.clone()))
        .ok_or_else(|| usage("pool verbs need --state-dir or pool_state_dir in --config"))?;
    let capacity = args
        .capacity
        .or(base.as_ref().map(|b| b.capacity))
        .ok_or_else(|| usage("pool verbs need --capacity or pool_capacity in --config"))?;
    let prefix = args
        .prefix
        .clone()
        .or_else(|| base.as_ref().map(|b| b.prefix.clone()))
        .unwrap_or_else(|| "pool".to_string());
    let grace = args.grace.or(base.as_ref().map(|b| b.grace_period)).unwrap_or(0);
    let mut cfg = PoolConfig::new(state_dir, prefix, capacity, grace);
    cfg.hook = base.and_then(|b| b.hook);
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn pool_failure(e: PoolError) -> Failure {
    match e {
        PoolError::EmptyDn | PoolError::DnTooLong(_) | PoolError::InvalidConfig(_) => usage(e.to_string()),
        _ => failed(e),
    }
}

fn pool(args: PoolArgs, config: Option<&SiteConfig>) -> Outcome {
    let cfg = pool_config(&args, config)?;
    let now = now_or(args.now);
    let pool = Pool::open(cfg).map_err(pool_failure)?;
    match args.command {
        PoolCommand::Allocate { dn } => {
            let account = pool.allocate(&dn, now).map_err(pool_failure)?;
            out(format!("{account}\n").as_bytes())?;
        }
        PoolCommand::Lease(LeaseCommand::Begin { dn }) => {
            let lease = pool.begin_lease(&dn, now).map_err(pool_failure)?;
            out(format!("{} {}\n", lease.lease_id, lease.account).as_bytes())?;
        }
        PoolCommand::Lease(LeaseCommand::End { lease_id }) => {
            let lease = pool.find_lease(&lease_id).map_err(pool_failure)?;
            pool.end_lease(&lease, now).map_err(pool_failure)?;
        }
        PoolCommand::Reclaim => {
            let freed = pool.reclaim(now).map_err(pool_failure)?;
            out(freed
                .iter()
                .map(|a| format!("{a}\n"))
                .collect::<String>()
                .as_bytes())?;
        }
        PoolCommand::Status => {
            let mut text = String::new();
            for b in pool.status().map_err(pool_failure)? {
                // the marker only means something once the last lease is gone
                let released = match b.released_at {
                    Some(t) if b.leases.is_empty() => t.to_string(),
                    _ => "-".to_string(),
                };
                text.push_str(&format!(
                    "{}\t{}\t{}\t{released}\n",
                    b.account,
                    b.dn,
                    b.leases.len()
                ));
            }
            out(text.as_bytes())?;
        }
    }
    Ok(0)
}

fn mapfile(cmd: MapfileCommand) -> Outcome {
    let MapfileCommand::Build { static_file, vo } = cmd;
    let static_entries = match static_file {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| failed(format!("{}: {e}", p.display())))?;
            parse_mapfile(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => Vec::new(),
    };
    let mut sources = Vec::new();
    for v in vo {
        let (location, pool) = v
            .rsplit_once('=')
            .filter(|(l, p)| !l.is_empty() && !p.is_empty())
            .ok_or_else(|| usage(format!("--vo expects <location>=<pool>, got {v:?}")))?;
        sources.push(VoSource {
            location: location.to_string(),
            pool: pool.to_string(),
        });
    }
    let built = build_mapfile(&static_entries, &sources, &dn_lists(None)?);
    out(built.text.as_bytes())?;
    for u in &built.unavailable {
        eprintln!("gridsite: skipped {u}");
    }
    Ok(if built.unavailable.is_empty() { 0 } else { 1 })
}

fn mount_table(args: &FsArgs, config: Option<&SiteConfig>) -> Result<MountTable, Failure> {
    let mut specs: Vec<MountSpec> = config.map(|c| c.mounts.clone()).unwrap_or_default();
    for m in &args.mounts {
        specs.push(MountSpec::parse(&format!("mount {m}")).map_err(|e| usage(e.to_string()))?);
    }
    if specs.is_empty() {
        return Err(usage("no mounts: pass --mount or a --config with mount lines"));
    }
    let default_acl = config.map_or_else(Acl::deny_all, |c| c.default_policy.acl());
    let root = config.and_then(|c| c.export_root.as_deref());
    build_table(&specs, &default_acl, Arc::new(dn_lists(root)?)).map_err(|e| usage(e.to_string()))
}

fn vfs_failure(e: VfsError) -> Failure {
    match e {
        VfsError::NoMount(_) | VfsError::InvalidPath(_) | VfsError::PathEscape(_) | VfsError::Config(_) => {
            usage(e.to_string())
        }
        _ => failed(e),
    }
}

fn filesystem(args: FsArgs, config: Option<&SiteConfig>, who: &CredentialSet) -> Outcome {
    let table = mount_table(&args, config)?;
    match args.command {
        FsCommand::Ls { path, json } => {
            let entries = table.list(who, &path).map_err(vfs_failure)?;
            let text = if json {
                format!("{}\n", serde_json::to_string(&entries).map_err(failed)?)
            } else {
                entries
                    .iter()
                    .map(|e| match e.kind {
                        FileKind::Directory => format!("{}/\n", e.name),
                        FileKind::File => format!("{}\n", e.name),
                    })
                    .collect()
            };
            out(text.as_bytes())?;
        }
        FsCommand::Cat { path } => out(&table.read(who, &path).map_err(vfs_failure)?)?,
        FsCommand::Put { path, file } => {
            let data = match file {
                Some(f) if f.as_os_str() != "-" => {
                    fs::read(&f).map_err(|e| failed(format!("{}: {e}", f.display())))?
                }
                _ => {
                    let mut buf = Vec::new();
                    io::stdin().read_to_end(&mut buf).map_err(failed)?;
                    buf
                }
            };
            table.write(who, &path, &data).map_err(vfs_failure)?;
        }
        FsCommand::Rm { path } => table.remove(who, &path).map_err(vfs_failure)?,
        FsCommand::Mkdir { path } => table.mkdir(who, &path).map_err(vfs_failure)?,
        FsCommand::Stat { path } => {
            let m = table.stat(who, &path).map_err(vfs_failure)?;
            let kind = match m.kind {
                FileKind::Directory => "directory",
                FileKind::File => "file",
            };
            out(format!("{kind} {} {}\n", m.size, m.modified).as_bytes())?;
        }
    }
    Ok(0)
}

fn serve(config: Option<SiteConfig>) -> Outcome {
    let config = config.ok_or_else(|| usage("serve needs --config"))?;
    let (site, listener) = gridsite_server::from_config(&config).map_err(failed)?;
    let running = gridsite_server::start(Arc::new(site), listener).map_err(failed)?;
    eprintln!("gridsite: serving on {}", running.local_addr());
    running.wait();
    Ok(0)
}
