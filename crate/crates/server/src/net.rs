//! Network front end: HTTP/1.1 over TCP, optionally TLS with client
//! certificates. Each request is identified, then handed to [`Site::handle`]
//! on the blocking pool.

use std::fs::File;
use std::io::{self, BufReader};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use bytes::Bytes;
use http::{Request, Response, StatusCode};
use http_body_util::{BodyExt, Full, Limited};
use hyper::body::Incoming;
use hyper::server::conn::http1;
use hyper::service::service_fn;
use hyper_util::rt::TokioIo;
use rustls::pki_types::pem::PemObject;
use rustls::pki_types::{CertificateDer, PrivateKeyDer};
use rustls::server::WebPkiClientVerifier;
use rustls::{RootCertStore, ServerConfig};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio_rustls::TlsAcceptor;

use crate::identity::{dn_from_certificate, identify, IdentityPolicy};
use crate::site::Site;

#[derive(Debug, Clone)]
pub struct TlsSettings {
    pub cert: std::path::PathBuf,
    pub key: std::path::PathBuf,
    /// Trust anchors for client certificates. Without it clients are never
    /// asked for one.
    pub client_ca: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ListenerConfig {
    pub addr: SocketAddr,
    pub tls: Option<TlsSettings>,
    pub identity: IdentityPolicy,
    pub max_body_bytes: usize,
}

fn invalid(path: &Path, e: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
}

fn load_certs(path: &Path) -> io::Result<Vec<CertificateDer<'static>>> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| invalid(path, e))?);
    let certs = CertificateDer::pem_reader_iter(&mut reader)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| invalid(path, e))?;
    if certs.is_empty() {
        return Err(invalid(path, "no certificates found"));
    }
    Ok(certs)
}

/// Builds the rustls server configuration. Client certificates are
/// optional: a client without one is served anonymously.
pub fn tls_config(tls: &TlsSettings) -> io::Result<ServerConfig> {
    let certs = load_certs(&tls.cert)?;
    let key = PrivateKeyDer::from_pem_file(&tls.key).map_err(|e| invalid(&tls.key, e))?;
    let builder = ServerConfig::builder();
    let builder = match &tls.client_ca {
        Some(ca) => {
            let mut roots = RootCertStore::empty();
            for c in load_certs(ca)? {
                roots.add(c).map_err(|e| invalid(ca, e))?;
            }
            let verifier = WebPkiClientVerifier::builder(Arc::new(roots))
                .allow_unauthenticated()
                .build()
                .map_err(|e| invalid(ca, e))?;
            builder.with_client_cert_verifier(verifier)
        }
        None => builder.with_no_client_auth(),
    };
    let mut cfg = builder
        .with_single_cert(certs, key)
        .map_err(|e| invalid(&tls.cert, e))?;
    cfg.alpn_protocols = vec![b"http/1.1".to_vec()];
    Ok(cfg)
}

/// A server running on its own thread and runtime.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

/// Binds `cfg.addr` and serves `site` until stopped. Binding and TLS setup
/// errors are reported here rather than on the server thread.
pub fn start(site: Arc<Site>, cfg: ListenerConfig) -> io::Result<RunningServer> {
    let acceptor = match &cfg.tls {
        Some(tls) => Some(TlsAcceptor::from(Arc::new(tls_config(tls)?))),
        None => None,
    };
    let std_listener = std::net::TcpListener::bind(cfg.addr)?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let (tx, rx) = oneshot::channel();
    let cfg = Arc::new(cfg);
    let thread = thread::Builder::new()
        .name("gridsite-server".into())
        .spawn(move || {
            let site_for_runtime = site.clone();
            runtime.block_on(async move {
                let listener = match TcpListener::from_std(std_listener) {
                    Ok(l) => l,
                    Err(e) => return tracing::error!(error = %e, "listener setup failed"),
                };
                accept_loop(listener, acceptor, site_for_runtime, cfg, rx).await;
            });
            // shut the runtime down before the last handle on the site goes away
            drop(runtime);
            drop(site);
        })?;
    tracing::info!(%addr, "listening");
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

async fn accept_loop(
    listener: TcpListener,
    acceptor: Option<TlsAcceptor>,
    site: Arc<Site>,
    cfg: Arc<ListenerConfig>,
    mut shutdown: oneshot::Receiver<()>,
) {
    loop {
        let (stream, peer) = tokio::select! {
            _ = &mut shutdown => return,
            accepted = listener.accept() => match accepted {
                Ok(a) => a,
                Err(e) => {
                    tracing::warn!(error = %e, "accept failed");
                    continue;
                }
            },
        };
        let site = site.clone();
        let cfg = cfg.clone();
        let acceptor = acceptor.clone();
        tokio::spawn(async move {
            let result = match acceptor {
                Some(acceptor) => match acceptor.accept(stream).await {
                    Ok(tls) => {
                        let dn = tls
                            .get_ref()
                            .1
                            .peer_certificates()
                            .and_then(|chain| chain.first())
                            .and_then(|leaf| dn_from_certificate(leaf));
                        serve_connection(TokioIo::new(tls), dn, site, cfg).await
                    }
                    Err(e) => {
                        tracing::debug!(%peer, error = %e, "TLS handshake failed");
                        return;
                    }
                },
                None => serve_connection(TokioIo::new(stream), None, site, cfg).await,
            };
            if let Err(e) = result {
                tracing::debug!(%peer, error = %e, "connection ended with error");
            }
        });
    }
}

async fn serve_connection<I>(
    io: I,
    peer_dn: Option<String>,
    site: Arc<Site>,
    cfg: Arc<ListenerConfig>,
) -> Result<(), hyper::Error>
where
    I: hyper::rt::Read + hyper::rt::Write + Unpin + Send + 'static,
{
    let peer_dn: Arc<Option<String>> = Arc::new(peer_dn);
    let service = service_fn(move |req: Request<Incoming>| {
        let site = site.clone();
        let cfg = cfg.clone();
        let peer_dn = peer_dn.clone();
        async move { Ok::<_, std::convert::Infallible>(respond(req, peer_dn.as_deref(), &site, &cfg).await) }
    });
    http1::Builder::new().serve_connection(io, service).await
}

fn plain(status: StatusCode, msg: &'static str) -> Response<Full<Bytes>> {
    let mut r = Response::new(Full::new(Bytes::from_static(msg.as_bytes())));
    *r.status_mut() = status;
    r
}

async fn respond(
    req: Request<Incoming>,
    peer_dn: Option<&str>,
    site: &Arc<Site>,
    cfg: &ListenerConfig,
) -> Response<Full<Bytes>> {
    let id = identify(peer_dn, req.headers(), &cfg.identity);
    let (parts, body) = req.into_parts();
    let body = match Limited::new(body, cfg.max_body_bytes).collect().await {
        Ok(b) => b.to_bytes().to_vec(),
        Err(_) => return plain(StatusCode::PAYLOAD_TOO_LARGE, "request body too large\n"),
    };
    let req = Request::from_parts(parts, body);
    tracing::debug!(method = %req.method(), path = req.uri().path(), source = %id.source, "request");
    let site = site.clone();
    match tokio::task::spawn_blocking(move || site.handle(&id.credentials, &req)).await {
        Ok(resp) => resp.map(|b| Full::new(Bytes::from(b))),
        Err(e) => {
            tracing::error!(error = %e, "handler panicked");
            plain(StatusCode::INTERNAL_SERVER_ERROR, "internal error\n")
        }
    }
}
