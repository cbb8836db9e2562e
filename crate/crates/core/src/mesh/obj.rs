use super::{Mesh, MeshError, SubGroup, DEFAULT_GROUP};
use crate::geom::Vec3;

/// Parses the OBJ subset `v`, `vn`, `f`, `g`, `o`, `usemtl`, `mtllib`.
///
/// Polygons are fan-triangulated from their first corner. Each `g`, `o` or
/// `usemtl` directive opens a new sub-group for the triangles that follow.
pub fn parse_obj(bytes: &[u8]) -> Result<Mesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|_| MeshError::NotText)?;

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut file_normals: Vec<Vec3> = Vec::new();
    let mut vertex_normals: Vec<Option<Vec3>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    let mut groups: Vec<SubGroup> = Vec::new();
    let mut material_libs = Vec::new();
    let mut current = DEFAULT_GROUP.to_string();
    let mut group_open = false;
    let mut saw_normal_refs = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        let Some(directive) = tokens.next() else {
            continue;
        };
        match directive {
            "v" | "vn" => {
                let mut xyz = [0.0; 3];
                for c in &mut xyz {
                    let tok = tokens.next().ok_or(MeshError::MissingCoordinate { line })?;
                    *c = parse_float(tok, line)?;
                }
                let p = Vec3::new(xyz[0], xyz[1], xyz[2]);
                if directive == "v" {
                    vertices.push(p);
                    vertex_normals.push(None);
                } else {
                    file_normals.push(p);
                }
            }
            "f" => {
                let mut corners: Vec<(u32, Option<usize>)> = Vec::new();
                for tok in tokens {
                    let mut parts = tok.split('/');
                    let v = parts.next().unwrap_or("");
                    let vi = resolve_index(v, vertices.len(), line)?;
                    let _texcoord = parts.next();
                    let ni = match parts.next() {
                        Some(n) if !n.is_empty() => Some(resolve_index(n, file_normals.len(), line)?),
                        _ => None,
                    };
                    corners.push((vi as u32, ni));
                }
                if corners.len() < 3 {
                    return Err(MeshError::ShortFace { line });
                }
                for &(vi, ni) in &corners {
                    if let Some(ni) = ni {
                        saw_normal_refs = true;
                        vertex_normals[vi as usize] = Some(file_normals[ni]);
                    }
                }
                if !group_open {
                    let start = triangles.len();
                    groups.push(SubGroup {
                        name: current.clone(),
                        triangles: start..start,
                    });
                    group_open = true;
                }
                let first = corners[0].0;
                for w in corners[1..].windows(2) {
                    triangles.push([first, w[0].0, w[1].0]);
                }
                if let Some(g) = groups.last_mut() {
                    g.triangles.end = triangles.len();
                }
            }
            "g" | "o" | "usemtl" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                current = if name.is_empty() {
                    DEFAULT_GROUP.to_string()
                } else {
                    name
                };
                group_open = false;
            }
            "mtllib" => {
                material_libs.extend(tokens.map(str::to_string));
            }
            _ => {}
        }
    }

    let normals = if saw_normal_refs && vertex_normals.iter().all(Option::is_some) {
        Some(
            vertex_normals
                .into_iter()
                .map(|n| {
                    let n = n.unwrap_or_default();
                    let len = n.norm();
                    if len > 0.0 {
                        n / len
                    } else {
                        n
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(Mesh {
        vertices,
        normals,
        triangles,
        sub_groups: groups,
        material_libs,
    })
}

fn parse_float(tok: &str, line: usize) -> Result<f64, MeshError> {
    tok.parse::<f64>().map_err(|_| MeshError::NonNumeric {
        line,
        token: tok.to_string(),
    })
}

/// Resolves a 1-based (or negative, relative) OBJ index to a 0-based one.
fn resolve_index(tok: &str, count: usize, line: usize) -> Result<usize, MeshError> {
    let raw: i64 = tok.parse().map_err(|_| MeshError::NonNumeric {
        line,
        token: tok.to_string(),
    })?;
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        count as i64 + raw
    } else {
        -1
    };
    if idx < 0 || idx as usize >= count {
        return Err(MeshError::IndexOutOfRange { line });
    }
    Ok(idx as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_triangle() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3").unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        assert!(m.normals.is_none());
    }

    #[test]
    fn quad_fans_from_first_corner() {
        let m = parse_obj(b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn out_of_range_reports_line() {
        let err = parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9").unwrap_err();
        assert_eq!(err, MeshError::IndexOutOfRange { line: 4 });
        assert_eq!(err.to_string(), "index out of range, line 4");
    }

    #[test]
    fn non_numeric_coordinate() {
        let err = parse_obj(b"v 0 zero 0\n").unwrap_err();
        assert!(matches!(err, MeshError::NonNumeric { line: 1, .. }));
    }

    #[test]
    fn short_face() {
        let err = parse_obj(b"v 0 0 0\nv 1 0 0\nf 1 2\n").unwrap_err();
        assert_eq!(err, MeshError::ShortFace { line: 3 });
    }

    #[test]
    fn slashes_negatives_and_normals() {
        let src = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nf -3//1 -2//1 -1//1\n";
        let m = parse_obj(src).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2]]);
        let normals = m.normals.unwrap();
        assert_eq!(normals[2], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn groups_and_materials() {
        let src = b"mtllib parts.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n\
                    f 1 2 3\ng body\nf 1 2 4\nusemtl pins\nf 1 3 4\nf 2 3 4\n";
        let m = parse_obj(src).unwrap();
        assert_eq!(m.material_libs, vec!["parts.mtl".to_string()]);
        let names: Vec<_> = m.sub_groups.iter().map(|g| g.name.as_str()).collect();
        assert_eq!(names, ["default", "body", "pins"]);
        assert_eq!(m.sub_groups[2].triangles, 2..4);
        assert_eq!(m.group_of(3), "pins");
    }

    #[test]
    fn obj_round_trip_preserves_triangles() {
        let src = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0.25\ng top\nf 1 2 3 4\ng side\nf 1 2 4\n";
        let m = parse_obj(src).unwrap();
        let again = parse_obj(m.to_obj().as_bytes()).unwrap();
        assert_eq!(again, m);
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
            let _ = parse_obj(&bytes);
        }

        #[test]
        fn directive_soup_never_panics(lines in proptest::collection::vec(
            prop_oneof![
                "v( -?[0-9]{1,3}(\\.[0-9]{1,2})?){0,4}",
                "vn( -?[0-9]{1,2}){0,3}",
                "f( -?[0-9]{1,2}(/[0-9]?(/[0-9])?)?){0,5}",
                "g [a-z]{0,4}",
                "usemtl [a-z]{1,4}",
                "[a-z#]{0,6}",
            ],
            0..40,
        )) {
            let src = lines.join("\n");
            if let Ok(m) = parse_obj(src.as_bytes()) {
                let n = m.vertices.len() as u32;
                prop_assert!(m.triangles.iter().all(|t| t.iter().all(|&i| i < n)));
            }
        }

        #[test]
        fn serialized_mesh_reparses_identically(
            pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 3..20),
            faces in proptest::collection::vec((0usize..1000, 0usize..1000, 0usize..1000), 1..20),
        ) {
            let vertices: Vec<Vec3> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
            let n = vertices.len();
            let triangles = faces.iter().map(|&(a, b, c)| [(a % n) as u32, (b % n) as u32, (c % n) as u32]).collect::<Vec<_>>();
            let count = triangles.len();
            let m = Mesh {
                vertices,
                triangles,
                sub_groups: vec![SubGroup { name: "part".into(), triangles: 0..count }],
                ..Default::default()
            };
            prop_assert_eq!(parse_obj(m.to_obj().as_bytes()).unwrap(), m);
        }
    }
}
