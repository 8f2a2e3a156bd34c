use geoseg_core::merge::{merge, MergeOptions, Strategy};
use geoseg_core::metrics::score_merged;
use geoseg_core::pipeline::{run_pipeline, workspace_status, NoCheckpoints, PipelineConfig, TaskState, Workspace};
use geoseg_core::predict::OracleSource;
use geoseg_core::raster::{
    open_raster, write_raster, MemRaster, MemSink, RasterInfo, RasterSource, SampleType, Window,
};
use geoseg_core::synthetic::SceneSpec;
use geoseg_core::tiling::{plan_grid, split_raster, Dataset, SplitOptions};

#[test]
fn geotiff_inputs_split_and_merge_back_with_georeferencing() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec::new(700, 520, 4, 3);
    let img_path = dir.path().join("ortho.tif");
    let lbl_path = dir.path().join("labels.tif");
    write_raster(&img_path, &MemRaster::load(&spec.image().unwrap()).unwrap()).unwrap();
    write_raster(&lbl_path, &MemRaster::load(&spec.labels().unwrap()).unwrap()).unwrap();

    let image = open_raster(&img_path, 1 << 20).unwrap();
    let labels = open_raster(&lbl_path, 1 << 20).unwrap();
    assert_eq!(image.info().geo, Some(spec.geo()));

    let grid = plan_grid(700, 520, 160, 160, 0.4).unwrap();
    let out = dir.path().join("ds");
    split_raster(image.as_ref(), Some(labels.as_ref()), &grid, &out, &SplitOptions::default(), &NoCheckpoints)
        .unwrap();
    let ds = Dataset::open(&out).unwrap();
    assert_eq!(ds.class_count().unwrap(), 4);
    assert_eq!(ds.meta.source_geo, Some(spec.geo()));

    let oracle = OracleSource::new(&ds, 4, 0.0, 0).unwrap();
    for strategy in [Strategy::Crop, Strategy::Logit] {
        let sink = MemSink::new(RasterInfo::new(700, 520, 1, SampleType::U8));
        merge(strategy, &ds.grid, &oracle, &sink, &NoCheckpoints, &MergeOptions::default()).unwrap();
        let map = sink.into_raster().unwrap();
        let full = Window::full(700, 520);
        assert_eq!(map.read_window_bytes(full).unwrap(), labels.read_window_bytes(full).unwrap());
        let report = score_merged(&map, labels.as_ref(), 4, None, &[]).unwrap();
        assert_eq!(report.miou, Some(1.0));
    }
}

#[test]
fn pipeline_over_files_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec::new(384, 384, 3, 8);
    write_raster(&dir.path().join("image.raw"), &MemRaster::load(&spec.image().unwrap()).unwrap()).unwrap();
    write_raster(&dir.path().join("labels.tif"), &MemRaster::load(&spec.labels().unwrap()).unwrap()).unwrap();
    let cfg = PipelineConfig::parse(
        "[source]\nimage = \"image.raw\"\nlabels = \"labels.tif\"\ngsd = 0.05\nclass_count = 3\n\
         [split]\ntile = 96\n[predict-check]\noracle = { noise_rate = 0.2, seed = 1 }\n\
         [merge]\nstrategy = \"logit\"\n[score]\nmode = \"tiles\"\n",
        dir.path(),
    )
    .unwrap();
    let root = dir.path().join("ws");
    let summary = {
        let ws = Workspace::open(&root).unwrap();
        run_pipeline(&cfg, &ws, None).unwrap()
    };
    let mut executed = summary.executed.clone();
    executed.sort();
    assert_eq!(executed, ["merge", "predict-check", "score", "split"]);
    assert_eq!(summary.executed[0], "split");
    let states = workspace_status(&root).unwrap();
    assert!(states.iter().all(|s| s.state == TaskState::Done));
    let merged = open_raster(&root.join("merged.raw"), u64::MAX).unwrap();
    assert_eq!((merged.info().width, merged.info().height), (384, 384));
}
