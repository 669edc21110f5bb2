//! Two-level online nearest-neighbour clustering of an actor's acquired
//! faces.
//!
//! Each face joins the nearest top cluster when its squared distance to that
//! cluster's centroid is below `theta_coarse`, otherwise it opens a new one.
//! Inside the chosen top cluster the same rule picks a sub-cluster with the
//! stricter `theta_fine`. Top clusters smaller than `min_cluster_size` are
//! outliers; the sub-cluster centroids of the remaining ones are the actor's
//! representatives.

use serde::{Deserialize, Serialize};

use crate::descriptor::{check_dims, sq_dist_unchecked, FaceDescriptor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    /// Squared-distance merge threshold for top clusters.
    pub theta_coarse: f64,
    /// Squared-distance merge threshold for sub-clusters.
    pub theta_fine: f64,
    /// Top clusters with fewer members are treated as outliers.
    pub min_cluster_size: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            theta_coarse: 1.0,
            theta_fine: 0.3,
            min_cluster_size: 5,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_fine > 0.0) || !(self.theta_coarse > 0.0) {
            return Err(Error::InvalidConfig(
                "profile thresholds must be positive".into(),
            ));
        }
        if !(self.theta_fine < self.theta_coarse) {
            return Err(Error::InvalidConfig(
                "profile.theta_fine must be below profile.theta_coarse".into(),
            ));
        }
        if self.min_cluster_size == 0 {
            return Err(Error::InvalidConfig(
                "profile.min_cluster_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    centroid: Vec<f64>,
    sum: Vec<f64>,
    member_count: usize,
    children: Vec<ClusterNode>,
}

impl ClusterNode {
    fn seed(face: &[f64]) -> Self {
        ClusterNode {
            centroid: face.to_vec(),
            sum: face.to_vec(),
            member_count: 1,
            children: Vec::new(),
        }
    }

    // centroid == sum / member_count after every update.
    fn absorb(&mut self, face: &[f64]) {
        self.member_count += 1;
        let n = self.member_count as f64;
        for ((s, c), x) in self.sum.iter_mut().zip(&mut self.centroid).zip(face) {
            *s += x;
            *c = *s / n;
        }
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn member_count(&self) -> usize {
        self.member_count
    }

    pub fn children(&self) -> &[ClusterNode] {
        &self.children
    }
}

/// Index of the nearest node and its squared distance; ties go to the
/// lowest index.
fn nearest(nodes: &[ClusterNode], face: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, n) in nodes.iter().enumerate() {
        let d = sq_dist_unchecked(&n.centroid, face);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorProfile {
    actor: String,
    dim: usize,
    top_clusters: Vec<ClusterNode>,
    face_log: Vec<FaceDescriptor>,
    /// (top cluster, sub-cluster) chosen for each logged face.
    membership: Vec<(usize, usize)>,
}

impl ActorProfile {
    pub fn new(actor: impl Into<String>, dim: usize) -> Self {
        ActorProfile {
            actor: actor.into(),
            dim,
            top_clusters: Vec::new(),
            face_log: Vec::new(),
            membership: Vec::new(),
        }
    }

    /// Rebuilds a profile by inserting `faces` in order.
    pub fn replay<'a>(
        actor: impl Into<String>,
        dim: usize,
        faces: impl IntoIterator<Item = &'a FaceDescriptor>,
        cfg: &ProfileConfig,
    ) -> Result<Self> {
        let mut p = ActorProfile::new(actor, dim);
        for f in faces {
            p.add_face(f, cfg)?;
        }
        Ok(p)
    }

    pub fn add_face(&mut self, face: &FaceDescriptor, cfg: &ProfileConfig) -> Result<()> {
        check_dims(self.dim, face.dim())?;
        let x = face.as_slice();

        let top = match nearest(&self.top_clusters, x) {
            Some((i, d)) if d < cfg.theta_coarse => {
                self.top_clusters[i].absorb(x);
                i
            }
            _ => {
                let mut node = ClusterNode::seed(x);
                node.children.push(ClusterNode::seed(x));
                self.top_clusters.push(node);
                self.face_log.push(face.clone());
                self.membership.push((self.top_clusters.len() - 1, 0));
                return Ok(());
            }
        };

        let children = &mut self.top_clusters[top].children;
        let sub = match nearest(children, x) {
            Some((j, d)) if d < cfg.theta_fine => {
                children[j].absorb(x);
                j
            }
            _ => {
                children.push(ClusterNode::seed(x));
                children.len() - 1
            }
        };
        self.face_log.push(face.clone());
        self.membership.push((top, sub));
        Ok(())
    }

    /// Sub-cluster centroids of every top cluster with at least
    /// `min_cluster_size` members, in cluster order.
    pub fn representatives(&self, cfg: &ProfileConfig) -> Vec<FaceDescriptor> {
        self.top_clusters
            .iter()
            .filter(|c| c.member_count >= cfg.min_cluster_size)
            .flat_map(|c| c.children.iter())
            .map(|s| FaceDescriptor::new(s.centroid.clone()))
            .collect()
    }

    pub fn actor(&self) -> &str {
        &self.actor
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn top_clusters(&self) -> &[ClusterNode] {
        &self.top_clusters
    }

    pub fn face_log(&self) -> &[FaceDescriptor] {
        &self.face_log
    }

    pub fn membership(&self) -> &[(usize, usize)] {
        &self.membership
    }

    pub fn len(&self) -> usize {
        self.face_log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.face_log.is_empty()
    }
}
