use std::path::Path;

use mscluster::export::{hierarchy_from_json, hierarchy_to_json, metrics_to_json};
use mscluster::ingest::{
    image_features, initial_partition_pointcloud, load_features, load_image, load_label_map,
    load_pointcloud, pointcloud_features, save_label_map, slic, write_label_image,
    write_labeled_pointcloud,
};
use mscluster::metrics::{hierarchy_metrics, metrics_csv, LevelMetrics};
use mscluster::pipeline::{derive_seed, geometric_schedule};
use mscluster::{build_hierarchy, FeatureMatrix, Hierarchy, Partition};

use crate::config::{CommandKind, ScheduleSpec, Settings};
use crate::CliError;

enum Input {
    Image(mscluster::ingest::ImageGrid),
    Cloud(mscluster::ingest::PointCloud),
    Labels,
}

pub fn execute(settings: &Settings) -> Result<(), CliError> {
    if settings.command == CommandKind::Metrics {
        return metrics_only(settings);
    }
    let (input, initial, features, colors) = prepare(settings)?;
    let n0 = initial.n_clusters();
    if let Some(expected) = settings.n_initial {
        if expected != n0 {
            return Err(CliError::data(format!(
                "initial partition has {n0} clusters but the config records {expected}"
            )));
        }
    }
    let schedule = match &settings.schedule {
        ScheduleSpec::Explicit(s) => s.clone(),
        ScheduleSpec::Geometric { levels, clusters_final } => {
            geometric_schedule(n0, *clusters_final, *levels)?
        }
    };
    let hierarchy = build_hierarchy(&initial, &features, &schedule, &settings.pipeline, settings.seed)?;

    let out = &settings.out;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    for (l, level) in hierarchy.levels.iter().enumerate() {
        match &input {
            Input::Image(img) => {
                write_label_image(level, img.width(), img.height(), out.join(format!("level_{l}.png")))?
            }
            Input::Cloud(cloud) => write_labeled_pointcloud(
                cloud,
                level,
                out.join(format!("level_{l}.ply")),
                settings.ply_encoding,
            )?,
            Input::Labels => save_label_map(level, out.join(format!("level_{l}.txt")))?,
        }
    }
    write(out, "hierarchy.json", &hierarchy_to_json(&hierarchy, settings.matrices))?;
    let metrics = hierarchy_metrics(&hierarchy.levels, colors.as_ref())?;
    write_metrics(out, &metrics)?;
    let mut manifest = serde_json::to_string_pretty(&settings.manifest(&schedule, n0))
        .expect("manifest serializes");
    manifest.push('\n');
    write(out, "manifest.json", &manifest)?;
    summarize(&hierarchy, &metrics, out);
    Ok(())
}

type Prepared = (Input, Partition, FeatureMatrix, Option<FeatureMatrix>);

fn prepare(settings: &Settings) -> Result<Prepared, CliError> {
    match settings.command {
        CommandKind::SegmentImage => {
            let img = load_image(&settings.input)?;
            let initial = slic(&img, &settings.slic)?;
            let features = image_features(&img, settings.spatial_weight)?;
            let colors = img.colors();
            Ok((Input::Image(img), initial, features, Some(colors)))
        }
        CommandKind::SegmentCloud => {
            let cloud = load_pointcloud(&settings.input)?;
            let (features, _) = pointcloud_features(&cloud, settings.use_colors)?;
            let initial = initial_partition_pointcloud(
                &features,
                settings.initial_clusters,
                derive_seed(settings.seed, &[u64::MAX]),
            )?;
            let colors = cloud.color_matrix();
            Ok((Input::Cloud(cloud), initial, features, colors))
        }
        CommandKind::Coarsen => {
            let initial = load_label_map(&settings.input)?;
            let features_path = settings.features.as_ref().expect("resolve checks --features");
            let features = load_features(features_path)?;
            let colors = settings.colors.as_ref().map(load_colors).transpose()?;
            Ok((Input::Labels, initial, features, colors))
        }
        CommandKind::Metrics => unreachable!("handled by metrics_only"),
    }
}

/// Per-node colors from a PNG, a colored PLY, or a feature text file.
fn load_colors(path: impl AsRef<Path>) -> Result<FeatureMatrix, CliError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => Ok(load_image(path)?.colors()),
        Some("ply") => load_pointcloud(path)?
            .color_matrix()
            .ok_or_else(|| CliError::data(format!("{} has no vertex colors", path.display()))),
        _ => Ok(load_features(path)?),
    }
}

fn metrics_only(settings: &Settings) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&settings.input)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", settings.input.display())))?;
    let hierarchy = hierarchy_from_json(&text)?;
    let colors = settings.colors.as_ref().map(load_colors).transpose()?;
    let metrics = hierarchy_metrics(&hierarchy.levels, colors.as_ref())?;
    let out = &settings.out;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    write_metrics(out, &metrics)?;
    summarize(&hierarchy, &metrics, out);
    Ok(())
}

fn write_metrics(out: &Path, metrics: &[LevelMetrics]) -> Result<(), CliError> {
    write(out, "metrics.csv", &metrics_csv(metrics))?;
    write(out, "metrics.json", &metrics_to_json(metrics))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn summarize(hierarchy: &Hierarchy, metrics: &[LevelMetrics], out: &Path) {
    for m in metrics {
        let mut line = format!("level {}: {} clusters", m.level, m.n_clusters);
        if let Some(r) = &m.rsc {
            line.push_str(&format!(", mean rsc {:.4}", r.mean));
        }
        if let Some(s) = m.color_std {
            line.push_str(&format!(", color std {s:.4}"));
        }
        println!("{line}");
    }
    println!("schedule {:?}, output in {}", hierarchy.schedule, out.display());
}
