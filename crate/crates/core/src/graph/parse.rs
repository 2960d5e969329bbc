//! Line-oriented graph document format.
//!
//! ```text
//! # comment
//! vertex <name>
//! edge <name> <v1> <v2> <length>
//! halfline <name> <v>
//! ```
//!
//! Serialization emits lines sorted by name so that parse/serialize is the
//! identity on normalized documents.

use super::{GraphBuilder, MetricGraph};
use crate::error::GraphError;

pub fn parse_graph(text: &str) -> Result<MetricGraph, GraphError> {
    let mut builder = GraphBuilder::new();
    let mut vertex_names: Vec<String> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_number = lineno + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        let column = |tok: &str| raw.find(tok).map(|p| p + 1).unwrap_or(1);
        let syntax = |message: String, tok: &str| GraphError::Syntax {
            line: line_number,
            column: column(tok),
            message,
        };

        match keyword {
            "vertex" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| syntax("vertex needs a name".into(), keyword))?;
                if tokens.next().is_some() {
                    return Err(syntax("trailing tokens after vertex".into(), keyword));
                }
                vertex_names.push(name.to_string());
                builder = builder.vertex(name);
            }
            "edge" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| syntax("edge needs a name".into(), keyword))?;
                let v1 = tokens
                    .next()
                    .ok_or_else(|| syntax("edge needs two endpoints".into(), keyword))?;
                let v2 = tokens
                    .next()
                    .ok_or_else(|| syntax("edge needs two endpoints".into(), keyword))?;
                let len_tok = tokens
                    .next()
                    .ok_or_else(|| syntax("edge needs a length".into(), keyword))?;
                if tokens.next().is_some() {
                    return Err(syntax("trailing tokens after edge".into(), keyword));
                }
                let length: f64 = len_tok
                    .parse()
                    .map_err(|_| syntax(format!("invalid length `{len_tok}`"), len_tok))?;
                for v in [v1, v2] {
                    if !vertex_names.iter().any(|n| n == v) {
                        return Err(GraphError::UnknownVertex {
                            vertex: v.to_string(),
                            line: line_number,
                        });
                    }
                }
                builder = builder.edge(name, v1, v2, length);
            }
            "halfline" => {
                let name = tokens
                    .next()
                    .ok_or_else(|| syntax("halfline needs a name".into(), keyword))?;
                let v = tokens
                    .next()
                    .ok_or_else(|| syntax("halfline needs a vertex".into(), keyword))?;
                if tokens.next().is_some() {
                    return Err(syntax("trailing tokens after halfline".into(), keyword));
                }
                if !vertex_names.iter().any(|n| n == v) {
                    return Err(GraphError::UnknownVertex {
                        vertex: v.to_string(),
                        line: line_number,
                    });
                }
                builder = builder.half_line(name, v);
            }
            other => {
                return Err(syntax(format!("unknown keyword `{other}`"), other));
            }
        }
    }
    builder.build()
}

/// Normalized document: vertices, edges, half-lines, each block sorted by name.
pub fn serialize_graph(graph: &MetricGraph) -> String {
    let mut out = String::new();

    let mut vnames: Vec<&str> = (0..graph.n_vertices())
        .map(|i| graph.vertex_name(super::VertexId(i)))
        .collect();
    vnames.sort_unstable();
    for v in vnames {
        out.push_str("vertex ");
        out.push_str(v);
        out.push('\n');
    }

    let mut edges: Vec<_> = graph.bounded_edges().iter().collect();
    edges.sort_by(|a, b| a.name.cmp(&b.name));
    for e in edges {
        out.push_str(&format!(
            "edge {} {} {} {}\n",
            e.name,
            graph.vertex_name(e.v1),
            graph.vertex_name(e.v2),
            e.length
        ));
    }

    let mut hls: Vec<_> = graph.half_lines().iter().collect();
    hls.sort_by(|a, b| a.name.cmp(&b.name));
    for h in hls {
        out.push_str(&format!(
            "halfline {} {}\n",
            h.name,
            graph.vertex_name(h.vertex)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TADPOLE: &str = "\
# tadpole: loop of length 2 with one half-line
vertex a
edge loop a a 2
halfline tail a
";

    #[test]
    fn parses_tadpole() {
        let g = parse_graph(TADPOLE).unwrap();
        assert_eq!(g.n_vertices(), 1);
        assert_eq!(g.bounded_edges().len(), 1);
        assert!(g.bounded_edges()[0].is_loop());
        assert_eq!(g.n_half_lines(), 1);
    }

    #[test]
    fn empty_core_is_distinct_diagnostic() {
        let doc = "vertex c\nhalfline h1 c\nhalfline h2 c\nhalfline h3 c\n";
        assert_eq!(parse_graph(doc).unwrap_err(), GraphError::EmptyCompactCore);
    }

    #[test]
    fn disconnected_is_distinct_diagnostic() {
        let doc = "vertex a\nvertex b\nvertex c\nvertex d\n\
                   edge e1 a b 1\nedge e2 c d 1\nhalfline h1 a\nhalfline h2 c\n";
        assert_eq!(parse_graph(doc).unwrap_err(), GraphError::Disconnected);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let doc = "vertex a\nedge e a a pi\nhalfline h a\n";
        match parse_graph(doc).unwrap_err() {
            GraphError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
        let doc = "vertex a\nedgy e a a 1\n";
        assert!(matches!(
            parse_graph(doc).unwrap_err(),
            GraphError::Syntax { line: 2, .. }
        ));
    }

    #[test]
    fn unknown_vertex_reported_with_line() {
        let doc = "vertex a\nedge e a z 1\nhalfline h a\n";
        assert_eq!(
            parse_graph(doc).unwrap_err(),
            GraphError::UnknownVertex {
                vertex: "z".into(),
                line: 2
            }
        );
    }

    #[test]
    fn nonpositive_length_diagnostic() {
        let doc = "vertex a\nedge e a a 0\nhalfline h a\n";
        assert!(matches!(
            parse_graph(doc).unwrap_err(),
            GraphError::NonpositiveLength { .. }
        ));
    }

    #[test]
    fn serialize_then_parse_is_identity_on_normalized_docs() {
        let g = parse_graph(TADPOLE).unwrap();
        let doc = serialize_graph(&g);
        let g2 = parse_graph(&doc).unwrap();
        assert_eq!(serialize_graph(&g2), doc);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let doc =
            "\n# leading comment\nvertex a # trailing comment\n\nedge loop a a 2.5\nhalfline t a\n";
        let g = parse_graph(doc).unwrap();
        assert_eq!(g.bounded_edges()[0].length, 2.5);
    }
}
