//! Decision-tree protocol engine.
//!
//! A tree is data: yes/no question nodes, severity prompts and terminals,
//! loaded from a TOML document and validated on construction. A
//! [`ProtocolState`] is a plain value; every step returns a new state and
//! records the answer in the trail, so a session can be rebuilt by replaying
//! its trail from the root.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    join_violations, Annotation, AnnotatorId, ErrorCategory, Segment, SegmentId, Severities, Severity, SystemId,
    SystemOutput, Violation,
};

pub type NodeId = String;

const DEFAULT_TREE: &str = include_str!("../assets/default_tree.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    /// Skip the node once PRN, TRM or GSMIS holds an error.
    NoMeaningTransferError,
}

impl Guard {
    fn fires(self, partial: &BTreeMap<ErrorCategory, Severity>) -> bool {
        match self {
            Guard::NoMeaningTransferError => ErrorCategory::MEANING_TRANSFER
                .iter()
                .any(|c| partial.get(c).is_some_and(|s| s.is_error())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Question {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        category: Option<ErrorCategory>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        guard: Option<Guard>,
        yes: NodeId,
        no: NodeId,
    },
    #[serde(rename = "severity")]
    SeverityPrompt {
        category: ErrorCategory,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        next: Option<NodeId>,
    },
    Terminal {
        #[serde(default)]
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl Node {
    fn successors(&self) -> Vec<&NodeId> {
        match &self.kind {
            NodeKind::Question { yes, no, .. } => vec![yes, no],
            NodeKind::SeverityPrompt { next, .. } => next.iter().collect(),
            NodeKind::Terminal { .. } => Vec::new(),
        }
    }

    pub fn text(&self) -> &str {
        match &self.kind {
            NodeKind::Question { text, .. } | NodeKind::SeverityPrompt { text, .. } | NodeKind::Terminal { text } => {
                text
            }
        }
    }
}

/// On-disk layout of a tree file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeDocument {
    version: String,
    root: NodeId,
    node: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree file could not be parsed: {0}")]
    Parse(String),
    #[error("tree has no nodes")]
    Empty,
    #[error("node id `{0}` is defined twice")]
    DuplicateNode(NodeId),
    #[error("root `{0}` is not a node")]
    MissingRoot(NodeId),
    #[error("node `{from}` points at unknown node `{to}`")]
    DanglingReference { from: NodeId, to: NodeId },
    #[error("cycle through node `{0}`")]
    Cycle(NodeId),
    #[error("nodes not reachable from the root: {}", .0.join(", "))]
    Unreachable(Vec<NodeId>),
}

/// Validated decision tree. Severity prompts rejoin the main line, so the
/// node graph is a rooted acyclic graph in which every node is reachable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TreeDocument", into = "TreeDocument")]
pub struct DecisionTree {
    version: String,
    root: NodeId,
    nodes: Vec<Node>,
    index: HashMap<NodeId, usize>,
}

impl PartialEq for DecisionTree {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.root == other.root && self.nodes == other.nodes
    }
}

impl TryFrom<TreeDocument> for DecisionTree {
    type Error = TreeError;

    fn try_from(doc: TreeDocument) -> Result<Self, TreeError> {
        DecisionTree::new(doc.version, doc.root, doc.node)
    }
}

impl From<DecisionTree> for TreeDocument {
    fn from(t: DecisionTree) -> Self {
        TreeDocument {
            version: t.version,
            root: t.root,
            node: t.nodes,
        }
    }
}

impl DecisionTree {
    pub fn new(version: impl Into<String>, root: impl Into<NodeId>, nodes: Vec<Node>) -> Result<Self, TreeError> {
        let mut index = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(TreeError::DuplicateNode(n.id.clone()));
            }
        }
        let tree = DecisionTree {
            version: version.into(),
            root: root.into(),
            nodes,
            index,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// The built-in tree shipped in `assets/default_tree.toml`.
    pub fn default_tree() -> Self {
        Self::from_toml(DEFAULT_TREE).expect("embedded default tree is valid")
    }

    pub fn default_tree_source() -> &'static str {
        DEFAULT_TREE
    }

    pub fn from_toml(src: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument = toml::from_str(src).map_err(|e| TreeError::Parse(e.to_string()))?;
        doc.try_into()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&TreeDocument::from(self.clone())).expect("tree serializes")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    fn validate(&self) -> Result<(), TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::Empty);
        }
        if self.node(&self.root).is_none() {
            return Err(TreeError::MissingRoot(self.root.clone()));
        }
        for n in &self.nodes {
            for s in n.successors() {
                if self.node(s).is_none() {
                    return Err(TreeError::DanglingReference {
                        from: n.id.clone(),
                        to: s.clone(),
                    });
                }
            }
        }

        // iterative DFS with colouring: 1 = on stack, 2 = finished
        let mut colour: HashMap<&str, u8> = HashMap::new();
        let mut stack: Vec<(&str, usize)> = vec![(self.root.as_str(), 0)];
        colour.insert(&self.root, 1);
        while let Some((id, child)) = stack.pop() {
            let succ = self.node(id).expect("checked above").successors();
            if child < succ.len() {
                stack.push((id, child + 1));
                let next = succ[child].as_str();
                match colour.get(next) {
                    Some(1) => return Err(TreeError::Cycle(next.to_owned())),
                    Some(_) => {}
                    None => {
                        colour.insert(next, 1);
                        stack.push((next, 0));
                    }
                }
            } else {
                colour.insert(id, 2);
            }
        }
        let unreachable: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| !colour.contains_key(n.id.as_str()))
            .map(|n| n.id.clone())
            .collect();
        if !unreachable.is_empty() {
            return Err(TreeError::Unreachable(unreachable));
        }
        Ok(())
    }
}

/// An annotator's answer at the current node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Yes,
    No,
    Severity(Severity),
}

/// What was recorded at a node. `GuardSkipped` marks nodes the engine passed
/// over on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrailAnswer {
    Yes,
    No,
    Severity(Severity),
    GuardSkipped,
}

impl TrailAnswer {
    fn as_response(self) -> Option<Response> {
        match self {
            TrailAnswer::Yes => Some(Response::Yes),
            TrailAnswer::No => Some(Response::No),
            TrailAnswer::Severity(s) => Some(Response::Severity(s)),
            TrailAnswer::GuardSkipped => None,
        }
    }
}

impl From<Response> for TrailAnswer {
    fn from(r: Response) -> Self {
        match r {
            Response::Yes => TrailAnswer::Yes,
            Response::No => TrailAnswer::No,
            Response::Severity(s) => TrailAnswer::Severity(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailStep {
    pub node: NodeId,
    pub answer: TrailAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cursor {
    At(NodeId),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolState {
    pub segment_id: SegmentId,
    pub system_id: SystemId,
    pub annotator_id: AnnotatorId,
    pub tree_version: String,
    pub cursor: Cursor,
    pub partial: BTreeMap<ErrorCategory, Severity>,
    pub trail: Vec<TrailStep>,
}

impl ProtocolState {
    pub fn is_done(&self) -> bool {
        self.cursor == Cursor::Done
    }

    /// The user-entered responses, in order, without engine skips.
    pub fn responses(&self) -> Vec<Response> {
        self.trail.iter().filter_map(|s| s.answer.as_response()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("output belongs to segment `{output_segment}`, not `{segment}`")]
    MismatchedSegment {
        segment: SegmentId,
        output_segment: SegmentId,
    },
    #[error("node `{node}` expects {expected}")]
    WrongResponseKind { node: NodeId, expected: &'static str },
    #[error("severity prompt `{node}` needs minor (1) or major (2)")]
    ZeroSeverity { node: NodeId },
    #[error("session is already complete")]
    SessionComplete,
    #[error("session is not complete (waiting at `{0}`)")]
    SessionIncomplete(NodeId),
    #[error("session was started on tree `{session}` but the tree is `{tree}`")]
    TreeVersionMismatch { session: String, tree: String },
    #[error("cursor points at unknown node `{0}`")]
    UnknownNode(NodeId),
    #[error("walk produced an invalid annotation: {}", join_violations(.0))]
    GatingViolation(Vec<Violation>),
}

impl DecisionTree {
    /// Opens a session at the root for one (segment, system output) pair.
    pub fn start_session(
        &self,
        segment: &Segment,
        output: &SystemOutput,
        annotator_id: AnnotatorId,
    ) -> Result<ProtocolState, ProtocolError> {
        if segment.id != output.segment_id {
            return Err(ProtocolError::MismatchedSegment {
                segment: segment.id.clone(),
                output_segment: output.segment_id.clone(),
            });
        }
        Ok(self.start_for(segment.id.clone(), output.system_id.clone(), annotator_id))
    }

    fn start_for(&self, segment_id: SegmentId, system_id: SystemId, annotator_id: AnnotatorId) -> ProtocolState {
        let mut state = ProtocolState {
            segment_id,
            system_id,
            annotator_id,
            tree_version: self.version.clone(),
            cursor: Cursor::At(self.root.clone()),
            partial: BTreeMap::new(),
            trail: Vec::new(),
        };
        self.settle(&mut state);
        state
    }

    /// Node the session is waiting at, or `None` when done.
    pub fn current_node(&self, state: &ProtocolState) -> Option<&Node> {
        match &state.cursor {
            Cursor::At(id) => self.node(id),
            Cursor::Done => None,
        }
    }

    /// Applies one response and returns the advanced state.
    pub fn answer(&self, mut state: ProtocolState, response: Response) -> Result<ProtocolState, ProtocolError> {
        if state.tree_version != self.version {
            return Err(ProtocolError::TreeVersionMismatch {
                session: state.tree_version,
                tree: self.version.clone(),
            });
        }
        let id = match &state.cursor {
            Cursor::Done => return Err(ProtocolError::SessionComplete),
            Cursor::At(id) => id.clone(),
        };
        let node = self.node(&id).ok_or_else(|| ProtocolError::UnknownNode(id.clone()))?;
        let next = match (&node.kind, response) {
            (NodeKind::Question { yes, .. }, Response::Yes) => Cursor::At(yes.clone()),
            (NodeKind::Question { no, .. }, Response::No) => Cursor::At(no.clone()),
            (NodeKind::Question { .. }, Response::Severity(_)) => {
                return Err(ProtocolError::WrongResponseKind {
                    node: id,
                    expected: "a yes/no answer",
                })
            }
            (NodeKind::SeverityPrompt { .. }, Response::Severity(Severity::NoError)) => {
                return Err(ProtocolError::ZeroSeverity { node: id })
            }
            (NodeKind::SeverityPrompt { category, next, .. }, Response::Severity(s)) => {
                // several errors of one category collapse to the worst one
                let slot = state.partial.entry(*category).or_default();
                *slot = (*slot).max(s);
                next.clone().map_or(Cursor::Done, Cursor::At)
            }
            (NodeKind::SeverityPrompt { .. }, _) => {
                return Err(ProtocolError::WrongResponseKind {
                    node: id,
                    expected: "a severity",
                })
            }
            (NodeKind::Terminal { .. }, _) => return Err(ProtocolError::SessionComplete),
        };
        state.trail.push(TrailStep {
            node: id,
            answer: response.into(),
        });
        state.cursor = next;
        self.settle(&mut state);
        Ok(state)
    }

    /// Moves past terminals and guarded nodes whose guard fires.
    fn settle(&self, state: &mut ProtocolState) {
        while let Cursor::At(id) = &state.cursor {
            let Some(node) = self.node(id) else { return };
            match &node.kind {
                NodeKind::Terminal { .. } => state.cursor = Cursor::Done,
                NodeKind::Question { guard: Some(g), no, .. } if g.fires(&state.partial) => {
                    state.trail.push(TrailStep {
                        node: id.clone(),
                        answer: TrailAnswer::GuardSkipped,
                    });
                    state.cursor = Cursor::At(no.clone());
                }
                _ => return,
            }
        }
    }

    /// Rebuilds a session from the root by re-applying the user responses in
    /// `trail`.
    pub fn replay(
        &self,
        segment_id: SegmentId,
        system_id: SystemId,
        annotator_id: AnnotatorId,
        trail: &[TrailStep],
    ) -> Result<ProtocolState, ProtocolError> {
        let mut state = self.start_for(segment_id, system_id, annotator_id);
        for r in trail.iter().filter_map(|s| s.answer.as_response()) {
            state = self.answer(state, r)?;
        }
        Ok(state)
    }

    /// Every complete walk through the tree, driven through the engine. A
    /// minor/major choice is tried at each severity prompt.
    pub fn explore(&self) -> Vec<WalkOutcome> {
        let start = self.start_for("walk".into(), "walk".into(), "walk".into());
        let mut out = Vec::new();
        let mut pending = vec![start];
        while let Some(state) = pending.pop() {
            let Some(node) = self.current_node(&state) else {
                out.push(WalkOutcome {
                    responses: state.responses(),
                    result: finalize(&state),
                });
                continue;
            };
            let options: &[Response] = match node.kind {
                NodeKind::Question { .. } => &[Response::Yes, Response::No],
                NodeKind::SeverityPrompt { .. } => {
                    &[Response::Severity(Severity::Minor), Response::Severity(Severity::Major)]
                }
                NodeKind::Terminal { .. } => &[],
            };
            for &r in options.iter().rev() {
                if let Ok(next) = self.answer(state.clone(), r) {
                    pending.push(next);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct WalkOutcome {
    pub responses: Vec<Response>,
    pub result: Result<Annotation, ProtocolError>,
}

/// Emits the annotation for a completed walk. Unvisited categories are 0 and
/// ADP is applicable iff no meaning-transfer error was recorded. The revision
/// is 1; callers that append to a log re-stamp it.
pub fn finalize(state: &ProtocolState) -> Result<Annotation, ProtocolError> {
    if let Cursor::At(id) = &state.cursor {
        return Err(ProtocolError::SessionIncomplete(id.clone()));
    }
    let severities: Severities = state.partial.iter().map(|(&c, &s)| (c, s)).collect();
    let a = Annotation::new(
        state.annotator_id.clone(),
        state.segment_id.clone(),
        state.system_id.clone(),
        severities,
    );
    let violations = a.gating_violations();
    if violations.is_empty() {
        Ok(a)
    } else {
        Err(ProtocolError::GatingViolation(violations))
    }
}

/// Nodes visited in order when every question is answered "no".
pub fn no_error_path(tree: &DecisionTree) -> Vec<&Node> {
    let mut path = Vec::new();
    let mut seen = HashSet::new();
    let mut cur = Some(tree.root().clone());
    while let Some(id) = cur {
        if !seen.insert(id.clone()) {
            break;
        }
        let Some(node) = tree.node(&id) else { break };
        path.push(node);
        cur = match &node.kind {
            NodeKind::Question { no, .. } => Some(no.clone()),
            NodeKind::SeverityPrompt { next, .. } => next.clone(),
            NodeKind::Terminal { .. } => None,
        };
    }
    path
}
