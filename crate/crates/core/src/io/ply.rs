//! Minimal PLY reader/writer: ASCII and binary (both endiannesses) input,
//! binary little-endian output.

use std::io::{BufRead, Write};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            other => return Err(Error::Ply(format!("unknown property type {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::I8 => "char",
            ScalarType::U8 => "uchar",
            ScalarType::I16 => "short",
            ScalarType::U16 => "ushort",
            ScalarType::I32 => "int",
            ScalarType::U32 => "uint",
            ScalarType::F32 => "float",
            ScalarType::F64 => "double",
        }
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8], little: bool) -> f64 {
        macro_rules! num {
            ($t:ty, $n:expr) => {{
                let a: [u8; $n] = b[..$n].try_into().expect("sized slice");
                (if little { <$t>::from_le_bytes(a) } else { <$t>::from_be_bytes(a) }) as f64
            }};
        }
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => num!(i16, 2),
            ScalarType::U16 => num!(u16, 2),
            ScalarType::I32 => num!(i32, 4),
            ScalarType::U32 => num!(u32, 4),
            ScalarType::F32 => num!(f32, 4),
            ScalarType::F64 => num!(f64, 8),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::I8 => out.push(v as i8 as u8),
            ScalarType::U8 => out.push(v as u8),
            ScalarType::I16 => out.extend((v as i16).to_le_bytes()),
            ScalarType::U16 => out.extend((v as u16).to_le_bytes()),
            ScalarType::I32 => out.extend((v as i32).to_le_bytes()),
            ScalarType::U32 => out.extend((v as u32).to_le_bytes()),
            ScalarType::F32 => out.extend((v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend(v.to_le_bytes()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
    pub columns: Vec<Column>,
}

impl Element {
    pub fn new(name: &str, count: usize) -> Self {
        Element {
            name: name.into(),
            count,
            properties: Vec::new(),
            columns: Vec::new(),
        }
    }

    pub fn scalar(mut self, name: &str, ty: ScalarType, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.count);
        self.properties.push(Property {
            name: name.into(),
            kind: PropertyKind::Scalar(ty),
        });
        self.columns.push(Column::Scalar(values));
        self
    }

    pub fn list(mut self, name: &str, count: ScalarType, item: ScalarType, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(values.len(), self.count);
        self.properties.push(Property {
            name: name.into(),
            kind: PropertyKind::List { count, item },
        });
        self.columns.push(Column::List(values));
        self
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        let i = self.properties.iter().position(|p| p.name == name)?;
        match &self.columns[i] {
            Column::Scalar(v) => Some(v),
            Column::List(_) => None,
        }
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::Ply(format!("element {} has no scalar property {name}", self.name)))
    }

    pub fn get_list(&self, name: &str) -> Option<&[Vec<f64>]> {
        let i = self.properties.iter().position(|p| p.name == name)?;
        match &self.columns[i] {
            Column::List(v) => Some(v),
            Column::Scalar(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlyData {
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    Binary { little: bool },
}

pub fn read_ply<R: BufRead>(mut r: R) -> Result<PlyData> {
    let mut line = String::new();
    let next_line = |r: &mut R, line: &mut String| -> Result<()> {
        line.clear();
        let n = r.read_line(line).map_err(|e| Error::Ply(e.to_string()))?;
        if n == 0 {
            return Err(Error::Ply("unexpected end of header".into()));
        }
        Ok(())
    };
    next_line(&mut r, &mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::Ply("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        next_line(&mut r, &mut line)?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", f, _] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::Binary { little: true },
                    "binary_big_endian" => Format::Binary { little: false },
                    other => return Err(Error::Ply(format!("unknown format {other}"))),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| Error::Ply(format!("bad element count {count}")))?;
                elements.push(Element::new(name, count));
            }
            ["property", "list", c, i, name] => {
                let e = elements.last_mut().ok_or_else(|| Error::Ply("property before element".into()))?;
                e.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::List {
                        count: ScalarType::parse(c)?,
                        item: ScalarType::parse(i)?,
                    },
                });
            }
            ["property", ty, name] => {
                let e = elements.last_mut().ok_or_else(|| Error::Ply("property before element".into()))?;
                e.properties.push(Property {
                    name: name.to_string(),
                    kind: PropertyKind::Scalar(ScalarType::parse(ty)?),
                });
            }
            ["end_header"] => break,
            _ => return Err(Error::Ply(format!("unrecognized header line {:?}", line.trim_end()))),
        }
    }
    let format = format.ok_or_else(|| Error::Ply("missing format line".into()))?;
    match format {
        Format::Ascii => {
            let mut rest = String::new();
            r.read_to_string(&mut rest).map_err(|e| Error::Ply(e.to_string()))?;
            let mut tokens = rest.split_whitespace();
            let mut next = || -> Result<f64> {
                tokens
                    .next()
                    .ok_or_else(|| Error::Ply("truncated ascii body".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Ply(e.to_string()))
            };
            for e in &mut elements {
                e.columns = init_columns(e);
                for _ in 0..e.count {
                    for (p, col) in e.properties.iter().zip(e.columns.iter_mut()) {
                        match (&p.kind, col) {
                            (PropertyKind::Scalar(_), Column::Scalar(v)) => v.push(next()?),
                            (PropertyKind::List { .. }, Column::List(v)) => {
                                let n = next()? as usize;
                                v.push((0..n).map(|_| next()).collect::<Result<_>>()?);
                            }
                            _ => unreachable!("columns mirror properties"),
                        }
                    }
                }
            }
        }
        Format::Binary { little } => {
            let mut body = Vec::new();
            r.read_to_end(&mut body).map_err(|e| Error::Ply(e.to_string()))?;
            let mut pos = 0;
            let mut take = |ty: ScalarType| -> Result<f64> {
                let s = ty.size();
                if pos + s > body.len() {
                    return Err(Error::Ply("truncated binary body".into()));
                }
                let v = ty.decode(&body[pos..pos + s], little);
                pos += s;
                Ok(v)
            };
            for e in &mut elements {
                e.columns = init_columns(e);
                for _ in 0..e.count {
                    for (p, col) in e.properties.iter().zip(e.columns.iter_mut()) {
                        match (&p.kind, col) {
                            (PropertyKind::Scalar(t), Column::Scalar(v)) => v.push(take(*t)?),
                            (PropertyKind::List { count, item }, Column::List(v)) => {
                                let n = take(*count)? as usize;
                                v.push((0..n).map(|_| take(*item)).collect::<Result<_>>()?);
                            }
                            _ => unreachable!("columns mirror properties"),
                        }
                    }
                }
            }
        }
    }
    Ok(PlyData { elements })
}

fn init_columns(e: &Element) -> Vec<Column> {
    e.properties
        .iter()
        .map(|p| match p.kind {
            PropertyKind::Scalar(_) => Column::Scalar(Vec::with_capacity(e.count)),
            PropertyKind::List { .. } => Column::List(Vec::with_capacity(e.count)),
        })
        .collect()
}

/// Binary little-endian output.
pub fn write_ply<W: Write>(data: &PlyData, mut w: W) -> std::io::Result<()> {
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    for e in &data.elements {
        header += &format!("element {} {}\n", e.name, e.count);
        for p in &e.properties {
            match p.kind {
                PropertyKind::Scalar(t) => header += &format!("property {} {}\n", t.name(), p.name),
                PropertyKind::List { count, item } => {
                    header += &format!("property list {} {} {}\n", count.name(), item.name(), p.name)
                }
            }
        }
    }
    header += "end_header\n";
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::new();
    for e in &data.elements {
        for row in 0..e.count {
            for (p, col) in e.properties.iter().zip(&e.columns) {
                match (&p.kind, col) {
                    (PropertyKind::Scalar(t), Column::Scalar(v)) => t.encode(v[row], &mut buf),
                    (PropertyKind::List { count, item }, Column::List(v)) => {
                        count.encode(v[row].len() as f64, &mut buf);
                        for &x in &v[row] {
                            item.encode(x, &mut buf);
                        }
                    }
                    _ => unreachable!("columns mirror properties"),
                }
            }
        }
        w.write_all(&buf)?;
        buf.clear();
    }
    Ok(())
}
