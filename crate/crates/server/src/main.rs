use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};
use uuis_core::auth::AuthConfig;
use uuis_core::clock::SystemClock;
use uuis_core::storage::{FileStore, Gateway, MemoryStore};
use uuis_core::Uuis;

#[derive(Parser)]
#[command(name = "uuis", version, about = "University inventory service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Memory,
    File,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, value_enum, default_value = "file")]
        backend: Backend,
        /// Data file for the file backend.
        #[arg(long, default_value = "var/uuis.json")]
        data: PathBuf,
        /// Fixture loaded at startup, replacing the store content.
        #[arg(long)]
        seed: Option<PathBuf>,
        #[arg(long, default_value = "conf/locations.conf")]
        locations_conf: PathBuf,
        /// Where password-reset mail is written, one JSON line per message.
        #[arg(long, default_value = "var/outbox.jsonl")]
        outbox: PathBuf,
    },
    /// Load a fixture into the file backend and print the row counts.
    Seed {
        fixture: PathBuf,
        #[arg(long, default_value = "var/uuis.json")]
        data: PathBuf,
    },
    /// Print a salted digest for a fixture's Password column.
    HashPassword { password: String },
    /// License reports.
    Licenses {
        #[command(subcommand)]
        cmd: LicenseCmd,
    },
}

#[derive(Subcommand)]
enum LicenseCmd {
    /// Licenses expiring within a window, and those already expired, as TSV.
    Expiring {
        #[arg(long)]
        days: i64,
        /// Reference date, YYYY-MM-DD; today when omitted.
        #[arg(long)]
        as_of: Option<NaiveDate>,
        #[arg(long, default_value = "var/uuis.json")]
        data: PathBuf,
    },
}

fn open(backend: Backend, data: &PathBuf) -> uuis_core::Result<Arc<dyn Gateway>> {
    Ok(match backend {
        Backend::Memory => Arc::new(MemoryStore::new()),
        Backend::File => Arc::new(FileStore::open(data)?),
    })
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Serve {
            bind,
            backend,
            data,
            seed,
            locations_conf,
            outbox,
        } => {
            let cfg = AuthConfig {
                outbox,
                ..AuthConfig::default()
            };
            let u = Uuis::new(open(backend, &data)?, Arc::new(SystemClock), cfg);
            match seed {
                Some(p) => {
                    u.seed(&p)?;
                }
                None => u.perms.ensure_catalog()?,
            }
            if locations_conf.exists() {
                u.locations.load_search_config(&locations_conf)?;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(bind).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                uuis_server::serve(listener, Arc::new(u)).await
            })?;
        }
        Cmd::Seed { fixture, data } => {
            let u = Uuis::with_defaults(open(Backend::File, &data)?);
            let summary = u.seed(&fixture)?;
            for (kind, n) in &summary.counts {
                println!("{kind}\t{n}");
            }
        }
        Cmd::HashPassword { password } => println!("{}", uuis_core::password::hash(&password)),
        Cmd::Licenses {
            cmd: LicenseCmd::Expiring { days, as_of, data },
        } => {
            let store = open(Backend::File, &data)?;
            let as_of = as_of.unwrap_or_else(|| chrono::Utc::now().date_naive());
            let r = uuis_core::software::expiry_report(store.as_ref(), days, as_of)?;
            println!("state\tLicenseID\tSoftware\tExpires\tDaysRemaining");
            for (state, rows) in [("expiring", &r.expiring), ("expired", &r.expired)] {
                for e in rows.iter() {
                    println!(
                        "{state}\t{}\t{}\t{}\t{}",
                        e.license, e.software, e.expires, e.days_remaining
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("uuis: {e}");
        std::process::exit(1);
    }
}
