//! Textual backend selection (`oracle:perfect`, `classical`, `remote:<url>`, ...)
//! and per-sample instantiation.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use super::{
    ClassicalGeodesicBackend, DelayOracle, GeodesicParams, IdentityOracle, NeverOracle,
    PerfectOracle, RemoteBackend, SegmenterBackend,
};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Default request timeout for remote backends.
pub const DEFAULT_REMOTE_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Perfect,
    /// Ground truth from round `k` (1-based) on, empty before.
    Delay(usize),
    Never,
    /// Echoes the accumulated positive interaction channel.
    Identity,
    Classical(GeodesicParams),
    Remote {
        url: String,
        timeout: Duration,
        refine: bool,
    },
}

impl BackendSpec {
    /// Whether building this backend requires the sample's ground truth.
    pub fn needs_ground_truth(&self) -> bool {
        matches!(self, BackendSpec::Perfect | BackendSpec::Delay(_))
    }

    /// Instantiates the backend. Oracles that replay ground truth need `gt`.
    pub fn build(&self, gt: Option<&BinaryMask>) -> Result<Box<dyn SegmenterBackend>> {
        let need_gt = || {
            gt.cloned().ok_or_else(|| {
                Error::InvalidParameter(format!("backend {self} needs a ground-truth mask"))
            })
        };
        Ok(match self {
            BackendSpec::Perfect => Box::new(PerfectOracle::new(need_gt()?)),
            BackendSpec::Delay(k) => Box::new(DelayOracle::new(need_gt()?, *k)),
            BackendSpec::Never => Box::new(NeverOracle),
            BackendSpec::Identity => Box::new(IdentityOracle),
            BackendSpec::Classical(p) => Box::new(ClassicalGeodesicBackend::new(*p)),
            BackendSpec::Remote {
                url,
                timeout,
                refine,
            } => Box::new(RemoteBackend::new(url.clone(), *timeout).with_refine(*refine)),
        })
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Perfect => f.write_str("oracle:perfect"),
            BackendSpec::Delay(k) => write!(f, "oracle:delay:{k}"),
            BackendSpec::Never => f.write_str("oracle:never"),
            BackendSpec::Identity => f.write_str("oracle:identity"),
            BackendSpec::Classical(_) => f.write_str("classical"),
            BackendSpec::Remote { url, .. } => write!(f, "remote:{url}"),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidParameter(format!(
                "unknown backend {s:?}; expected oracle:{{perfect|delay:<k>|never|identity}}, classical or remote:<url>"
            ))
        };
        if s == "classical" {
            return Ok(BackendSpec::Classical(GeodesicParams::default()));
        }
        if let Some(url) = s.strip_prefix("remote:") {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(Error::InvalidParameter(format!(
                    "remote endpoint {url:?} must be an http(s) URL"
                )));
            }
            return Ok(BackendSpec::Remote {
                url: url.to_owned(),
                timeout: DEFAULT_REMOTE_TIMEOUT,
                refine: false,
            });
        }
        let kind = s.strip_prefix("oracle:").ok_or_else(bad)?;
        match kind {
            "perfect" => Ok(BackendSpec::Perfect),
            "never" => Ok(BackendSpec::Never),
            "identity" => Ok(BackendSpec::Identity),
            _ => {
                let k = kind.strip_prefix("delay:").ok_or_else(bad)?;
                let k: usize = k.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(Error::InvalidParameter("delay must be at least 1".into()));
                }
                Ok(BackendSpec::Delay(k))
            }
        }
    }
}
