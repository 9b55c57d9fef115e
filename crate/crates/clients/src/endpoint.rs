//! Service endpoint configuration and the client error taxonomy.

use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    /// The service could not be reached after exhausting retries.
    #[error("transport failure against {url} after {attempts} attempt(s): {message}")]
    Transport {
        url: String,
        attempts: u32,
        message: String,
    },
    /// The service answered, but not with a usable response.
    #[error("protocol error from {url}{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Protocol {
        url: String,
        status: Option<u16>,
        message: String,
    },
    /// The response was well-formed but semantically unusable.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
}

impl ClientError {
    /// Transport failures are worth retrying; protocol/domain errors are not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ClientError::Transport { .. })
    }
}

/// Connection parameters for one external service.
#[derive(Debug, Clone)]
pub struct ServiceEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub backoff: Duration,
    pub auth_token: Option<String>,
}

impl ServiceEndpoint {
    pub fn builder(base_url: &str) -> Result<EndpointBuilder, ClientError> {
        if base_url.is_empty() {
            return Err(ClientError::InvalidEndpoint("base url is empty".into()));
        }
        Ok(EndpointBuilder {
            inner: ServiceEndpoint {
                base_url: base_url.trim_end_matches('/').to_string(),
                timeout: Duration::from_secs(60),
                max_retries: 3,
                max_in_flight: 8,
                backoff: Duration::from_millis(200),
                auth_token: None,
            },
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }
}

pub struct EndpointBuilder {
    inner: ServiceEndpoint,
}

impl EndpointBuilder {
    pub fn timeout_secs(mut self, secs: f64) -> Self {
        self.inner.timeout = Duration::from_secs_f64(secs.max(1e-3));
        self
    }

    pub fn max_retries(mut self, retries: u32) -> Self {
        self.inner.max_retries = retries;
        self
    }

    pub fn max_in_flight(mut self, n: usize) -> Self {
        self.inner.max_in_flight = n;
        self
    }

    pub fn backoff_ms(mut self, ms: u64) -> Self {
        self.inner.backoff = Duration::from_millis(ms);
        self
    }

    pub fn auth_token(mut self, token: Option<String>) -> Self {
        self.inner.auth_token = token;
        self
    }

    pub fn build(self) -> Result<ServiceEndpoint, ClientError> {
        if self.inner.timeout.is_zero() {
            return Err(ClientError::InvalidEndpoint("timeout must be > 0".into()));
        }
        if self.inner.max_in_flight == 0 {
            return Err(ClientError::InvalidEndpoint(
                "max_in_flight must be >= 1".into(),
            ));
        }
        Ok(self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_normalizes_and_validates() {
        let ep = ServiceEndpoint::builder("http://localhost:9000/")
            .unwrap()
            .timeout_secs(5.0)
            .max_in_flight(2)
            .build()
            .unwrap();
        assert_eq!(ep.url("/detect"), "http://localhost:9000/detect");
        assert!(ServiceEndpoint::builder("").is_err());
        assert!(ServiceEndpoint::builder("http://x")
            .unwrap()
            .max_in_flight(0)
            .build()
            .is_err());
    }

    #[test]
    fn retryability() {
        let t = ClientError::Transport {
            url: "u".into(),
            attempts: 1,
            message: "m".into(),
        };
        let p = ClientError::Protocol {
            url: "u".into(),
            status: Some(400),
            message: "m".into(),
        };
        assert!(t.is_retryable());
        assert!(!p.is_retryable());
    }
}
