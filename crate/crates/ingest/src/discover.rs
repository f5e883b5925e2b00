//! Breadth-first snowball over federation listings.

use std::collections::{HashSet, VecDeque};

use crate::client::ApiClient;
use crate::domain::{is_valid_domain, normalize_host};
use crate::error::{IngestError, Result};
use crate::lemmy;
use crate::types::{DiscoveredVia, InstanceHost};

/// Every host within `max_depth` hops of a seed receives one listing
/// request; only hosts shallower than `max_depth` are expanded. Seeds are
/// always returned. A non-seed whose listing fails is returned
/// unreachable; one whose listing is malformed is dropped.
pub async fn discover_instances(client: &ApiClient, seeds: &[String], max_depth: usize) -> Result<Vec<InstanceHost>> {
    if seeds.is_empty() {
        return Err(IngestError::Config("no seed hosts".into()));
    }
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        let h = normalize_host(s);
        if !is_valid_domain(&h) {
            return Err(IngestError::InvalidHost(s.clone()));
        }
        if seen.insert(h.clone()) {
            queue.push_back((h, 0usize, DiscoveredVia::SeedPortal));
        }
    }
    let mut out = Vec::new();
    while let Some((host, depth, via)) = queue.pop_front() {
        match client.get_json(&host, lemmy::FEDERATED_INSTANCES, &[]).await {
            Ok(v) => match lemmy::parse_federated(&v) {
                Ok(linked) => {
                    if depth < max_depth {
                        for l in linked {
                            if seen.insert(l.clone()) {
                                queue.push_back((l, depth + 1, DiscoveredVia::FederationSnowball));
                            }
                        }
                    }
                    out.push(InstanceHost { host, discovered_via: via, reachable: true });
                }
                Err(msg) => {
                    log::warn!("{host}: malformed federation listing ({msg}); skipping");
                    if via == DiscoveredVia::SeedPortal {
                        out.push(InstanceHost { host, discovered_via: via, reachable: true });
                    }
                }
            },
            Err(IngestError::Malformed { message, .. }) => {
                log::warn!("{host}: undecodable federation listing ({message}); skipping");
                if via == DiscoveredVia::SeedPortal {
                    out.push(InstanceHost { host, discovered_via: via, reachable: true });
                }
            }
            Err(e) => {
                log::warn!("{host}: unreachable ({e})");
                out.push(InstanceHost { host, discovered_via: via, reachable: false });
            }
        }
    }
    Ok(out)
}
