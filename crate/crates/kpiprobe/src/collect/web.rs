//! Web dashboard collector: log in over HTTP, fetch the status page and
//! pull fields out with a selector map.

use std::io::{self, Read};
use std::time::Duration;

use kpiprobe_core::web::{self, SelectorMap, WebLayout};
use kpiprobe_core::{CollectError, CollectorDescriptor, Endpoint, ErrorKind, KpiSnapshot, Method};

use super::Collector;
use crate::clock::Clock;

const MAX_PAGE: u64 = 4 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebSessionConfig {
    pub base_url: String,
    /// `(user, password)`; `None` when the dashboard needs no login.
    pub credentials: Option<(String, String)>,
    pub login_path: String,
    pub user_field: String,
    pub pass_field: String,
    pub status_path: String,
    pub device: String,
    pub timeout: Duration,
}

impl WebSessionConfig {
    pub fn new(base_url: &str, device: &str) -> Self {
        WebSessionConfig {
            base_url: base_url.trim_end_matches('/').to_owned(),
            credentials: None,
            login_path: "/login".into(),
            user_field: "user".into(),
            pass_field: "pass".into(),
            status_path: "/status".into(),
            device: device.to_owned(),
            timeout: Duration::from_secs(2),
        }
    }

    pub fn with_credentials(mut self, user: &str, pass: &str) -> Self {
        self.credentials = Some((user.to_owned(), pass.to_owned()));
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let rest = self
            .base_url
            .strip_prefix("http://")
            .ok_or_else(|| format!("base URL {:?} must start with http://", self.base_url))?;
        if rest.is_empty() || rest.contains(['/', ' ', '?', '#']) {
            return Err(format!("base URL {:?} must be http://host[:port]", self.base_url));
        }
        Ok(())
    }

    fn endpoint(&self) -> Endpoint {
        let hostport = self.base_url.trim_start_matches("http://");
        match hostport.rsplit_once(':').map(|(h, p)| (h, p.parse::<u16>())) {
            Some((host, Ok(port))) => Endpoint::Tcp { host: host.to_owned(), port },
            _ => Endpoint::Tcp { host: hostport.to_owned(), port: 80 },
        }
    }
}

pub struct WebCollector {
    descriptor: CollectorDescriptor,
    config: WebSessionConfig,
    selectors: SelectorMap,
    agent: ureq::Agent,
    token: Option<String>,
}

impl WebCollector {
    pub fn new(config: WebSessionConfig, selectors: Option<SelectorMap>, period_s: f64) -> Result<Self, String> {
        config.validate()?;
        let selectors = match selectors {
            Some(s) => s,
            None => WebLayout::for_device(&config.device)
                .ok_or_else(|| format!("no built-in page layout for {:?}; configure selectors", config.device))?
                .selector_map(),
        };
        let descriptor = CollectorDescriptor::new(Method::Web, config.device.clone(), period_s, config.endpoint())
            .map_err(|e| e.to_string())?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).redirects(0).build();
        Ok(WebCollector { descriptor, config, selectors, agent, token: None })
    }

    /// Authenticate and keep the session cookie. Without credentials no
    /// request is made.
    pub fn login(&mut self) -> Result<(), CollectError> {
        let Some((user, pass)) = &self.config.credentials else {
            self.token = Some(String::new());
            return Ok(());
        };
        let url = format!("{}{}", self.config.base_url, self.config.login_path);
        let response = self
            .agent
            .post(&url)
            .send_form(&[(self.config.user_field.as_str(), user.as_str()), (self.config.pass_field.as_str(), pass.as_str())])
            .map_err(|e| http_error(&url, e))?;
        let token = response
            .all("set-cookie")
            .into_iter()
            .filter_map(|c| c.split(';').next())
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| k.trim() == "session")
            .map(|(_, v)| v.trim().to_owned())
            .ok_or_else(|| CollectError::new(ErrorKind::AuthFailed, format!("{url}: no session cookie in reply")))?;
        self.token = Some(token);
        Ok(())
    }

    fn fetch(&self) -> Result<String, CollectError> {
        let url = format!("{}{}", self.config.base_url, self.config.status_path);
        let mut request = self.agent.get(&url);
        if let Some(token) = self.token.as_deref().filter(|t| !t.is_empty()) {
            request = request.set("Cookie", &format!("session={token}"));
        }
        let response = request.call().map_err(|e| http_error(&url, e))?;
        let mut page = String::new();
        response
            .into_reader()
            .take(MAX_PAGE)
            .read_to_string(&mut page)
            .map_err(|e| super::io_error(&url, &e))?;
        Ok(page)
    }
}

fn http_error(url: &str, e: ureq::Error) -> CollectError {
    match e {
        ureq::Error::Status(code @ (401 | 403), _) => {
            CollectError::new(ErrorKind::AuthFailed, format!("{url}: HTTP {code}"))
        }
        ureq::Error::Status(code, response) => {
            let body = response.into_string().unwrap_or_default();
            CollectError::protocol(format!("{url}: HTTP {code}")).with_raw(body.into_bytes())
        }
        ureq::Error::Transport(t) => {
            let timed_out = t
                .source()
                .and_then(|s| s.downcast_ref::<io::Error>())
                .is_some_and(|io| matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock));
            let kind = if timed_out { ErrorKind::Timeout } else { ErrorKind::TransportDown };
            CollectError::new(kind, format!("{url}: {t}"))
        }
    }
}

use std::error::Error as _;

impl Collector for WebCollector {
    fn descriptor(&self) -> &CollectorDescriptor {
        &self.descriptor
    }

    fn prepare(&mut self, _clock: &dyn Clock) -> Result<(), CollectError> {
        self.login()
    }

    fn poll(&mut self, clock: &dyn Clock) -> Result<KpiSnapshot, CollectError> {
        if self.token.is_none() {
            self.login()?;
        }
        let page = match self.fetch() {
            Err(e) if e.kind == ErrorKind::AuthFailed && self.config.credentials.is_some() => {
                self.login()?;
                self.fetch()?
            }
            other => other?,
        };
        let stamp = clock.stamp();
        let snap = web::parse_page(&page, &self.selectors, &self.config.device).map_err(|e| e.at(stamp))?;
        Ok(snap.with_timestamp(stamp))
    }
}
