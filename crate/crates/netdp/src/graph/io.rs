//! On-disk layout of the graph store: a directory holding `meta`,
//! `remap`, and one `shard_<i>` file per shard, all little-endian
//! length-prefixed binary with a version tag.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::binio::*;
use crate::error::{Error, Result};

use super::{IngestStats, NodeId, PartitionedGraph, Shard};

const MAGIC: &[u8; 4] = b"NDPG";
const VERSION: u32 = 1;

impl PartitionedGraph {
    /// Serializes the store into `dir`. Output is byte-stable: the same
    /// ingested content always produces identical files.
    pub fn save<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;

        let mut meta = BufWriter::new(File::create(dir.join("meta"))?);
        write_header(&mut meta, MAGIC, VERSION)?;
        write_u64(&mut meta, self.num_nodes() as u64)?;
        write_u32(&mut meta, self.num_shards as u32)?;
        write_f64(&mut meta, self.alpha)?;
        write_u32(&mut meta, self.max_degree)?;
        write_u64(&mut meta, self.stats.edges_kept)?;
        write_u64(&mut meta, self.stats.skipped_lines)?;
        write_u64(&mut meta, self.stats.dropped_self_loops)?;
        write_u64(&mut meta, self.stats.dropped_duplicates)?;
        write_u64(&mut meta, self.stats.capped_nodes)?;

        let mut remap = BufWriter::new(File::create(dir.join("remap"))?);
        write_header(&mut remap, MAGIC, VERSION)?;
        write_u64(&mut remap, self.raw_ids.len() as u64)?;
        for raw in &self.raw_ids {
            write_str(&mut remap, raw)?;
        }

        for (i, shard) in self.shards.iter().enumerate() {
            let mut w = BufWriter::new(File::create(dir.join(format!("shard_{i}")))?);
            write_header(&mut w, MAGIC, VERSION)?;
            write_u64(&mut w, shard.len() as u64)?;
            for (v, nbrs) in shard {
                write_u64(&mut w, v.0)?;
                write_u32(&mut w, nbrs.len() as u32)?;
                for n in nbrs {
                    write_u64(&mut w, n.0)?;
                }
            }
        }
        Ok(())
    }

    /// Loads a store previously written by [`PartitionedGraph::save`].
    pub fn load<P: AsRef<Path>>(dir: P) -> Result<PartitionedGraph> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta");
        let path_str = meta_path.display().to_string();
        let mut meta = BufReader::new(File::open(&meta_path)?);
        expect_header(&mut meta, MAGIC, VERSION, &path_str)?;
        let n = read_u64(&mut meta)? as usize;
        let num_shards = read_u32(&mut meta)? as usize;
        let alpha = read_f64(&mut meta)?;
        let max_degree = read_u32(&mut meta)?;
        let stats = IngestStats {
            edges_kept: read_u64(&mut meta)?,
            skipped_lines: read_u64(&mut meta)?,
            dropped_self_loops: read_u64(&mut meta)?,
            dropped_duplicates: read_u64(&mut meta)?,
            capped_nodes: read_u64(&mut meta)?,
        };
        if num_shards == 0 {
            return Err(Error::Format {
                path: path_str,
                reason: "zero shards".into(),
            });
        }

        let remap_path = dir.join("remap");
        let remap_str = remap_path.display().to_string();
        let mut remap = BufReader::new(File::open(&remap_path)?);
        expect_header(&mut remap, MAGIC, VERSION, &remap_str)?;
        let count = read_u64(&mut remap)? as usize;
        if count != n {
            return Err(Error::Format {
                path: remap_str.clone(),
                reason: format!("remap holds {count} ids, meta says {n}"),
            });
        }
        let mut raw_ids = Vec::with_capacity(n);
        for _ in 0..n {
            raw_ids.push(read_str(&mut remap, &remap_str)?);
        }

        let mut degrees = vec![0u32; n];
        let mut shards: Vec<Shard> = Vec::with_capacity(num_shards);
        for i in 0..num_shards {
            let shard_path = dir.join(format!("shard_{i}"));
            let shard_str = shard_path.display().to_string();
            let mut r = BufReader::new(File::open(&shard_path)?);
            expect_header(&mut r, MAGIC, VERSION, &shard_str)?;
            let entries = read_u64(&mut r)? as usize;
            let mut shard = Shard::new();
            for _ in 0..entries {
                let v = read_u64(&mut r)?;
                let deg = read_u32(&mut r)? as usize;
                let mut nbrs = Vec::with_capacity(deg);
                for _ in 0..deg {
                    nbrs.push(NodeId(read_u64(&mut r)?));
                }
                if v >= n as u64 || deg == 0 {
                    return Err(Error::Format {
                        path: shard_str.clone(),
                        reason: format!("bad adjacency record for node {v}"),
                    });
                }
                degrees[v as usize] = deg as u32;
                shard.insert(NodeId(v), nbrs);
            }
            shards.push(shard);
        }

        Ok(PartitionedGraph::new(
            num_shards, shards, degrees, raw_ids, alpha, max_degree, stats,
        ))
    }
}
