use serde::Serialize;

/// JSON-friendly record of the best proof of a goal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProofTrace {
    pub goal: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proof: Option<TraceNode>,
}

/// One proof step. Generated predicates are shown as their nearest
/// vocabulary predicate with the similarity in brackets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceNode {
    pub goal: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reformulator: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Kernel values contributed by this unification, in position order.
    pub kernels: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TraceNode>,
}
