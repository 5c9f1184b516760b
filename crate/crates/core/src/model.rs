//! Topology data model: endpoints, cloud regions, the links between them,
//! and the metric algebra for chains of links.
//!
//! A path's metrics compose as follows:
//!
//! * throughput is limited by the slowest segment (minimum capacity),
//! * round-trip time is additive,
//! * jitter composes as the root-sum-of-squares of per-segment standard
//!   deviations (independent noise),
//! * delivery probability is multiplicative, so loss is `1 - Π(1 - p_i)`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when comparing metric values.
pub const REL_TOLERANCE: f64 = 1e-9;

/// `true` when `a` and `b` agree to within [`REL_TOLERANCE`].
pub fn approx_eq(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs()).max(1.0);
    (a - b).abs() <= REL_TOLERANCE * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Endpoint,
    Region,
}

/// Reference to either an endpoint or a cloud region.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: String,
}

impl NodeRef {
    pub fn endpoint(id: impl Into<String>) -> Self {
        Self { kind: NodeKind::Endpoint, id: id.into() }
    }

    pub fn region(id: impl Into<String>) -> Self {
        Self { kind: NodeKind::Region, id: id.into() }
    }

    pub fn is_region(&self) -> bool {
        self.kind == NodeKind::Region
    }

    pub fn is_endpoint(&self) -> bool {
        self.kind == NodeKind::Endpoint
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NodeKind::Endpoint => write!(f, "endpoint:{}", self.id),
            NodeKind::Region => write!(f, "region:{}", self.id),
        }
    }
}

/// A server or probe location outside the cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub id: String,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_hint: Option<String>,
    #[serde(default)]
    pub has_probe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudRegion {
    pub id: String,
    #[serde(default)]
    pub name: String,
    /// Position of the region on throughput charts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_index: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    IspInternet,
    CloudOverlay,
    DirectConnect,
}

impl LinkKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::IspInternet => "isp_internet",
            LinkKind::CloudOverlay => "cloud_overlay",
            LinkKind::DirectConnect => "direct_connect",
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A bidirectional network segment with symmetric attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub src: NodeRef,
    pub dst: NodeRef,
    pub kind: LinkKind,
    pub capacity_mbps: f64,
    pub base_rtt_ms: f64,
    #[serde(default)]
    pub jitter_stddev_ms: f64,
    #[serde(default)]
    pub loss_prob: f64,
}

impl Link {
    pub fn touches(&self, node: &NodeRef) -> bool {
        &self.src == node || &self.dst == node
    }

    /// The node on the other side of `node`, if the link touches it.
    pub fn opposite(&self, node: &NodeRef) -> Option<&NodeRef> {
        if &self.src == node {
            Some(&self.dst)
        } else if &self.dst == node {
            Some(&self.src)
        } else {
            None
        }
    }

    pub fn joins(&self, a: &NodeRef, b: &NodeRef) -> bool {
        (&self.src == a && &self.dst == b) || (&self.src == b && &self.dst == a)
    }

    pub fn profile(&self) -> SegmentProfile {
        SegmentProfile {
            link_id: self.id.clone(),
            kind: self.kind,
            capacity_mbps: self.capacity_mbps,
            base_rtt_ms: self.base_rtt_ms,
            jitter_stddev_ms: self.jitter_stddev_ms,
            loss_prob: self.loss_prob,
        }
    }
}

/// Source of measured RTTs that take precedence over a link's static
/// `base_rtt_ms`.
pub trait RttOverride {
    fn rtt_for(&self, link: &Link) -> Option<f64>;
}

impl<T: RttOverride + ?Sized> RttOverride for &T {
    fn rtt_for(&self, link: &Link) -> Option<f64> {
        (**self).rtt_for(link)
    }
}

/// The static topology values, with no measured overrides.
pub struct StaticRtt;

impl RttOverride for StaticRtt {
    fn rtt_for(&self, _link: &Link) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    #[serde(default)]
    pub regions: Vec<CloudRegion>,
    #[serde(default)]
    pub endpoints: Vec<Endpoint>,
    #[serde(default)]
    pub links: Vec<Link>,
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn endpoint(&self, id: &str) -> Option<&Endpoint> {
        self.endpoints.iter().find(|e| e.id == id)
    }

    pub fn region(&self, id: &str) -> Option<&CloudRegion> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn contains_node(&self, node: &NodeRef) -> bool {
        match node.kind {
            NodeKind::Endpoint => self.endpoint(&node.id).is_some(),
            NodeKind::Region => self.region(&node.id).is_some(),
        }
    }

    /// All links touching `node`, in declaration order.
    pub fn links_at<'a>(&'a self, node: &'a NodeRef) -> impl Iterator<Item = &'a Link> + 'a {
        self.links.iter().filter(move |l| l.touches(node))
    }

    /// Index of links by id for repeated lookups.
    pub fn link_index(&self) -> HashMap<&str, &Link> {
        self.links.iter().map(|l| (l.id.as_str(), l)).collect()
    }
}

/// Which topology rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    EmptyId,
    DuplicateEndpoint,
    DuplicateRegion,
    DuplicateLink,
    UnknownRegionHint,
    UnresolvedLinkNode,
    CapacityNotPositive,
    NegativeRtt,
    NegativeJitter,
    LossOutOfRange,
    OverlayMustJoinRegions,
    AccessNeedsEndpoint,
}

impl Rule {
    pub fn message(self) -> &'static str {
        match self {
            Rule::EmptyId => "id must be nonempty",
            Rule::DuplicateEndpoint => "duplicate endpoint id",
            Rule::DuplicateRegion => "duplicate region id",
            Rule::DuplicateLink => "duplicate link id",
            Rule::UnknownRegionHint => "region_hint names an unknown region",
            Rule::UnresolvedLinkNode => "link node does not resolve",
            Rule::CapacityNotPositive => "capacity_mbps must be positive",
            Rule::NegativeRtt => "base_rtt_ms must be nonnegative",
            Rule::NegativeJitter => "jitter_stddev_ms must be nonnegative",
            Rule::LossOutOfRange => "loss_prob out of range",
            Rule::OverlayMustJoinRegions => "overlay must join regions",
            Rule::AccessNeedsEndpoint => "access link needs an endpoint side",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Id of the offending endpoint, region or link.
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

/// Checks every structural invariant of `t`. An empty result means valid.
pub fn validate_topology(t: &Topology) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: &str, rule: Rule| {
        out.push(Violation { subject: subject.to_string(), rule });
    };

    let mut seen = HashSet::new();
    for r in &t.regions {
        if r.id.is_empty() {
            push(&r.id, Rule::EmptyId);
        }
        if !seen.insert(r.id.as_str()) {
            push(&r.id, Rule::DuplicateRegion);
        }
    }
    let regions = seen;

    let mut endpoints = HashSet::new();
    for e in &t.endpoints {
        if e.id.is_empty() {
            push(&e.id, Rule::EmptyId);
        }
        if !endpoints.insert(e.id.as_str()) {
            push(&e.id, Rule::DuplicateEndpoint);
        }
        if let Some(hint) = &e.region_hint {
            if !regions.contains(hint.as_str()) {
                push(&e.id, Rule::UnknownRegionHint);
            }
        }
    }

    let resolves = |n: &NodeRef| match n.kind {
        NodeKind::Endpoint => endpoints.contains(n.id.as_str()),
        NodeKind::Region => regions.contains(n.id.as_str()),
    };

    let mut links = HashSet::new();
    for l in &t.links {
        let id = l.id.as_str();
        if l.id.is_empty() {
            push(id, Rule::EmptyId);
        }
        if !links.insert(id) {
            push(id, Rule::DuplicateLink);
        }
        if !resolves(&l.src) || !resolves(&l.dst) {
            push(id, Rule::UnresolvedLinkNode);
        }
        // Negated comparisons so that NaN is rejected as well.
        if !l.capacity_mbps.is_finite() || l.capacity_mbps <= 0.0 {
            push(id, Rule::CapacityNotPositive);
        }
        if !l.base_rtt_ms.is_finite() || l.base_rtt_ms < 0.0 {
            push(id, Rule::NegativeRtt);
        }
        if !l.jitter_stddev_ms.is_finite() || l.jitter_stddev_ms < 0.0 {
            push(id, Rule::NegativeJitter);
        }
        if !(0.0..=1.0).contains(&l.loss_prob) {
            push(id, Rule::LossOutOfRange);
        }
        match l.kind {
            LinkKind::CloudOverlay => {
                if !(l.src.is_region() && l.dst.is_region()) {
                    push(id, Rule::OverlayMustJoinRegions);
                }
            }
            LinkKind::IspInternet | LinkKind::DirectConnect => {
                if !(l.src.is_endpoint() || l.dst.is_endpoint()) {
                    push(id, Rule::AccessNeedsEndpoint);
                }
            }
        }
    }
    out
}

/// An ordered chain of link ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub segments: Vec<String>,
}

impl Path {
    pub fn new<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self { segments: segments.into_iter().map(Into::into).collect() }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join(">"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("path has no segments")]
    Empty,
    #[error("unknown link id `{0}`")]
    UnknownLink(String),
    #[error("link `{0}` appears more than once")]
    RepeatedLink(String),
    #[error("segment `{link}` at position {index} does not continue from the previous segment")]
    NonContiguous { index: usize, link: String },
    #[error("path does not start at {0}")]
    WrongSource(NodeRef),
}

/// Resolved attributes of one path segment. Carried inside route plans so
/// that simulation replays exactly the values the planner saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProfile {
    pub link_id: String,
    pub kind: LinkKind,
    pub capacity_mbps: f64,
    pub base_rtt_ms: f64,
    pub jitter_stddev_ms: f64,
    pub loss_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub bottleneck_mbps: f64,
    pub rtt_ms: f64,
    pub jitter_ms: f64,
    pub loss_prob: f64,
}

impl PathMetrics {
    pub fn approx_eq(&self, other: &PathMetrics) -> bool {
        approx_eq(self.bottleneck_mbps, other.bottleneck_mbps)
            && approx_eq(self.rtt_ms, other.rtt_ms)
            && approx_eq(self.jitter_ms, other.jitter_ms)
            && approx_eq(self.loss_prob, other.loss_prob)
    }
}

/// Folds segment profiles into path metrics. Segments are folded in order,
/// so two callers with the same profiles get bit-identical results.
///
/// Panics if `segments` is empty.
pub fn compose_metrics(segments: &[SegmentProfile]) -> PathMetrics {
    assert!(!segments.is_empty(), "cannot compose metrics of an empty path");
    let mut bottleneck = f64::INFINITY;
    let mut rtt = 0.0;
    let mut jitter_sq = 0.0;
    let mut delivery = 1.0;
    for s in segments {
        bottleneck = bottleneck.min(s.capacity_mbps);
        rtt += s.base_rtt_ms;
        jitter_sq += s.jitter_stddev_ms * s.jitter_stddev_ms;
        delivery *= 1.0 - s.loss_prob;
    }
    PathMetrics {
        bottleneck_mbps: bottleneck,
        rtt_ms: rtt,
        jitter_ms: jitter_sq.sqrt(),
        loss_prob: (1.0 - delivery).clamp(0.0, 1.0),
    }
}

/// Walks `p` from `start`, returning the visited nodes (one more than the
/// number of segments).
pub fn trace_from(t: &Topology, p: &Path, start: &NodeRef) -> Result<Vec<NodeRef>, PathError> {
    let index = t.link_index();
    let links = resolve_links(&index, p)?;
    walk(&links, start).map_err(|e| match e {
        PathError::NonContiguous { index: 0, .. } => PathError::WrongSource(start.clone()),
        other => other,
    })
}

/// Walks `p` from whichever end of its first segment makes it contiguous.
pub fn trace(t: &Topology, p: &Path) -> Result<Vec<NodeRef>, PathError> {
    let index = t.link_index();
    let links = resolve_links(&index, p)?;
    let first = links[0];
    match walk(&links, &first.src) {
        Ok(nodes) => Ok(nodes),
        Err(forward) => walk(&links, &first.dst).map_err(|_| forward),
    }
}

fn resolve_links<'a>(index: &HashMap<&str, &'a Link>, p: &Path) -> Result<Vec<&'a Link>, PathError> {
    if p.is_empty() {
        return Err(PathError::Empty);
    }
    let mut seen = HashSet::new();
    p.segments
        .iter()
        .map(|id| {
            if !seen.insert(id.as_str()) {
                return Err(PathError::RepeatedLink(id.clone()));
            }
            index.get(id.as_str()).copied().ok_or_else(|| PathError::UnknownLink(id.clone()))
        })
        .collect()
}

fn walk(links: &[&Link], start: &NodeRef) -> Result<Vec<NodeRef>, PathError> {
    let mut nodes = Vec::with_capacity(links.len() + 1);
    nodes.push(start.clone());
    let mut at = start.clone();
    for (i, l) in links.iter().enumerate() {
        let next = l
            .opposite(&at)
            .ok_or_else(|| PathError::NonContiguous { index: i, link: l.id.clone() })?
            .clone();
        nodes.push(next.clone());
        at = next;
    }
    Ok(nodes)
}

/// Segment profiles of `p` with measured RTTs applied.
pub fn segment_profiles(
    t: &Topology,
    p: &Path,
    rtts: &dyn RttOverride,
) -> Result<Vec<SegmentProfile>, PathError> {
    trace(t, p)?;
    Ok(p.segments
        .iter()
        .map(|id| {
            let link = t.link(id).expect("traced path resolves");
            let mut profile = link.profile();
            if let Some(rtt) = rtts.rtt_for(link) {
                profile.base_rtt_ms = rtt;
            }
            profile
        })
        .collect())
}

pub fn path_metrics(t: &Topology, p: &Path) -> Result<PathMetrics, PathError> {
    path_metrics_with(t, p, &StaticRtt)
}

pub fn path_metrics_with(t: &Topology, p: &Path, rtts: &dyn RttOverride) -> Result<PathMetrics, PathError> {
    Ok(compose_metrics(&segment_profiles(t, p, rtts)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(id: &str, a: NodeRef, b: NodeRef, kind: LinkKind, cap: f64, rtt: f64, loss: f64) -> Link {
        Link {
            id: id.into(),
            src: a,
            dst: b,
            kind,
            capacity_mbps: cap,
            base_rtt_ms: rtt,
            jitter_stddev_ms: 0.0,
            loss_prob: loss,
        }
    }

    fn region(id: &str) -> CloudRegion {
        CloudRegion { id: id.into(), name: id.into(), display_index: None }
    }

    fn endpoint(id: &str) -> Endpoint {
        Endpoint { id: id.into(), label: id.into(), region_hint: None, has_probe: false }
    }

    /// so --isp-- ro --overlay-- rd
    fn three_node() -> Topology {
        Topology {
            regions: vec![region("ro"), region("rd")],
            endpoints: vec![endpoint("so")],
            links: vec![
                link("a", NodeRef::endpoint("so"), NodeRef::region("ro"), LinkKind::IspInternet, 100.0, 10.0, 0.01),
                link("b", NodeRef::region("ro"), NodeRef::region("rd"), LinkKind::CloudOverlay, 50.0, 20.0, 0.0),
            ],
        }
    }

    #[test]
    fn empty_topology_is_valid() {
        assert!(validate_topology(&Topology::default()).is_empty());
    }

    #[test]
    fn loss_above_one_is_flagged() {
        let mut t = three_node();
        t.links[0].loss_prob = 1.5;
        let v = validate_topology(&t);
        assert_eq!(v, vec![Violation { subject: "a".into(), rule: Rule::LossOutOfRange }]);
        assert_eq!(v[0].rule.message(), "loss_prob out of range");
    }

    #[test]
    fn every_rule_against_three_nodes() {
        assert!(validate_topology(&three_node()).is_empty());

        // Overlay from an endpoint to a region.
        let mut t = three_node();
        t.links[1].src = NodeRef::endpoint("so");
        let v = validate_topology(&t);
        assert_eq!(v, vec![Violation { subject: "b".into(), rule: Rule::OverlayMustJoinRegions }]);
        assert_eq!(v[0].rule.message(), "overlay must join regions");

        // ISP link between two regions.
        let mut t = three_node();
        t.links[0].src = NodeRef::region("rd");
        assert_eq!(validate_topology(&t)[0].rule, Rule::AccessNeedsEndpoint);

        let mut t = three_node();
        t.links[0].dst = NodeRef::region("nowhere");
        assert_eq!(validate_topology(&t)[0].rule, Rule::UnresolvedLinkNode);

        let mut t = three_node();
        t.links[0].capacity_mbps = 0.0;
        t.links[1].base_rtt_ms = -1.0;
        let rules: Vec<Rule> = validate_topology(&t).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::CapacityNotPositive, Rule::NegativeRtt]);

        let mut t = three_node();
        t.links[1].jitter_stddev_ms = f64::NAN;
        assert_eq!(validate_topology(&t)[0].rule, Rule::NegativeJitter);

        let mut t = three_node();
        t.links.push(t.links[0].clone());
        assert_eq!(validate_topology(&t)[0].rule, Rule::DuplicateLink);

        let mut t = three_node();
        t.regions.push(region("ro"));
        t.endpoints.push(endpoint(""));
        t.endpoints[0].region_hint = Some("xx".into());
        let rules: Vec<Rule> = validate_topology(&t).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::DuplicateRegion, Rule::UnknownRegionHint, Rule::EmptyId]);
    }

    #[test]
    fn same_id_for_endpoint_and_region_is_allowed() {
        let mut t = three_node();
        t.endpoints.push(endpoint("ro"));
        assert!(validate_topology(&t).is_empty());
    }

    #[test]
    fn bottleneck_is_the_access_segment() {
        let mut t = three_node();
        t.links[0].capacity_mbps = 256.0;
        t.links[1].capacity_mbps = 1200.0;
        let m = path_metrics(&t, &Path::new(["a", "b"])).unwrap();
        assert_eq!(m.bottleneck_mbps, 256.0);
    }

    #[test]
    fn single_segment_identity() {
        let t = three_node();
        let m = path_metrics(&t, &Path::new(["b"])).unwrap();
        assert_eq!(m.bottleneck_mbps, 50.0);
        assert_eq!(m.rtt_ms, 20.0);
        assert_eq!(m.loss_prob, 0.0);
        assert_eq!(m.jitter_ms, 0.0);
    }

    #[test]
    fn three_segment_hand_arithmetic() {
        let mut t = three_node();
        t.endpoints.push(endpoint("sd"));
        t.links.push(link("c", NodeRef::region("rd"), NodeRef::endpoint("sd"), LinkKind::IspInternet, 75.0, 5.0, 0.01));
        let m = path_metrics(&t, &Path::new(["a", "b", "c"])).unwrap();
        assert_eq!(m.bottleneck_mbps, 50.0);
        assert_eq!(m.rtt_ms, 35.0);
        assert!(approx_eq(m.loss_prob, 0.0199), "{}", m.loss_prob);
        // Reversed traversal is the same path.
        let r = path_metrics(&t, &Path::new(["c", "b", "a"])).unwrap();
        assert!(r.approx_eq(&m));
    }

    #[test]
    fn jitter_is_root_sum_of_squares() {
        let mut t = three_node();
        t.links[0].jitter_stddev_ms = 3.0;
        t.links[1].jitter_stddev_ms = 4.0;
        let m = path_metrics(&t, &Path::new(["a", "b"])).unwrap();
        assert_eq!(m.jitter_ms, 5.0);
    }

    #[test]
    fn path_errors() {
        let t = three_node();
        assert_eq!(path_metrics(&t, &Path::new(Vec::<String>::new())), Err(PathError::Empty));
        assert_eq!(path_metrics(&t, &Path::new(["zz"])), Err(PathError::UnknownLink("zz".into())));
        assert_eq!(path_metrics(&t, &Path::new(["a", "a"])), Err(PathError::RepeatedLink("a".into())));

        let mut t2 = three_node();
        t2.endpoints.push(endpoint("x"));
        t2.endpoints.push(endpoint("y"));
        t2.links.push(link("c", NodeRef::endpoint("x"), NodeRef::endpoint("y"), LinkKind::IspInternet, 1.0, 1.0, 0.0));
        assert!(matches!(
            path_metrics(&t2, &Path::new(["a", "c"])),
            Err(PathError::NonContiguous { index: 1, .. })
        ));
    }

    #[test]
    fn trace_from_checks_source() {
        let t = three_node();
        let nodes = trace_from(&t, &Path::new(["a", "b"]), &NodeRef::endpoint("so")).unwrap();
        assert_eq!(nodes, vec![NodeRef::endpoint("so"), NodeRef::region("ro"), NodeRef::region("rd")]);
        assert_eq!(
            trace_from(&t, &Path::new(["a", "b"]), &NodeRef::region("rd")),
            Err(PathError::WrongSource(NodeRef::region("rd")))
        );
    }

    #[test]
    fn topology_json_field_names() {
        let t = three_node();
        let text = t.to_json_pretty();
        assert!(text.contains("\"capacity_mbps\""));
        assert!(text.contains("\"isp_internet\""));
        assert!(text.contains("\"kind\": \"endpoint\""));
        assert_eq!(Topology::from_json(&text).unwrap(), t);
    }
}
