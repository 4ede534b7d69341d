//! Deterministic dev/confirm splitting by MD5 bucketing.
//!
//! Each problem ID is hashed with MD5, the 16-byte digest is read as a
//! big-endian 128-bit unsigned integer, and the bucket is that integer
//! mod 5. Buckets {0, 1} form the development split and {2, 3, 4} the
//! confirmation split. The digest-to-integer rule is fixed and named by
//! [`CONVENTION`] so a manifest records exactly how it was produced.

use std::collections::BTreeMap;

use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Versioned name of the digest-to-bucket convention used by [`bucket`].
pub const CONVENTION: &str = "md5-be128-mod5/v1";

/// Frozen split artifact: sorted ID lists plus the bucket of every ID.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub convention: String,
    /// MD5 hex of the sorted, newline-joined input IDs.
    pub input_hash: String,
    pub dev_ids: Vec<String>,
    pub confirm_ids: Vec<String>,
    pub bucket_of: BTreeMap<String, u8>,
}

/// Bucket a problem ID into {0..4}.
pub fn bucket(id: &str) -> Result<u8> {
    if id.is_empty() {
        return Err(Error::InvalidParam("id must be non-empty".into()));
    }
    let digest = Md5::digest(id.as_bytes());
    let value = u128::from_be_bytes(digest.into());
    Ok((value % 5) as u8)
}

/// Partition an ID list into dev (buckets {0,1}) and confirm (buckets {2,3,4}).
pub fn build_manifest(ids: &[String]) -> Result<SplitManifest> {
    let mut seen = std::collections::BTreeSet::new();
    let mut dups = Vec::new();
    for id in ids {
        if !seen.insert(id.as_str()) && !dups.contains(id) {
            dups.push(id.clone());
        }
    }
    if !dups.is_empty() {
        return Err(Error::DuplicateIds(dups));
    }

    let mut dev_ids = Vec::new();
    let mut confirm_ids = Vec::new();
    let mut bucket_of = BTreeMap::new();
    for id in ids {
        let b = bucket(id)?;
        bucket_of.insert(id.clone(), b);
        if b <= 1 {
            dev_ids.push(id.clone());
        } else {
            confirm_ids.push(id.clone());
        }
    }
    dev_ids.sort();
    confirm_ids.sort();

    let mut sorted: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
    sorted.sort_unstable();
    let joined = sorted.join("\n");
    let input_hash = format!("{:x}", Md5::digest(joined.as_bytes()));

    Ok(SplitManifest {
        convention: CONVENTION.to_string(),
        input_hash,
        dev_ids,
        confirm_ids,
        bucket_of,
    })
}
