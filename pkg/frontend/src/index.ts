export {
  CSV_VERSION_LINE,
  CsvFormatError,
  Table,
  parseSlocCsv,
  column,
  columnsMatching,
} from "./csv";
export {
  Series,
  LineFigureSpec,
  HistogramSpec,
  fmt,
  renderLineFigure,
  renderHistogram,
} from "./svg";
export {
  FIGURE_KINDS,
  FigureKind,
  Figure,
  Summary,
  SummaryCheck,
  spectrumDecay,
  varianceEnvelope,
  martingaleResiduals,
  couplingIdentity,
  buildFigure,
} from "./figures";
